fn main() {
    env_logger::init();
    std::process::exit(sca_kit_cli::run(std::env::args_os()));
}
