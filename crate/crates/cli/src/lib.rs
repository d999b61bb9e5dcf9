//! Command-line harness for the sca-kit solvers: instance generation,
//! solver runs with CSV traces and JSON reports, and solver races.

pub mod instance;
pub mod runner;
pub mod spec;

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::spec::{App, Experiment, Overrides, Source};

pub const EXIT_OK: i32 = 0;
pub const EXIT_TOLERANCE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, spec or instance files.
    Invalid(String),
    /// Output or solver failure.
    Failed(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Invalid(m) => write!(f, "invalid input: {m}"),
            CliError::Failed(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => EXIT_INVALID,
            CliError::Failed(_) => EXIT_TOLERANCE,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "sca-kit", version, about = "Successive convex approximation solvers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write deterministic instances for one or more seeds.
    Generate(CommonArgs),
    /// Solve instances and write traces plus report.json.
    Run(CommonArgs),
    /// Run several solver configurations on identical instances.
    Race(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    #[arg(long, value_enum)]
    pub app: Option<App>,
    /// Experiment specification (JSON).
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Instance header written by `generate`.
    #[arg(long)]
    pub instance: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub repetitions: Option<usize>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Concurrent repetitions.
    #[arg(long, env = "SCA_KIT_WORKERS")]
    pub workers: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
}

impl From<&CommonArgs> for Overrides {
    fn from(a: &CommonArgs) -> Self {
        Overrides {
            app: a.app,
            spec: a.spec.clone(),
            instance: a.instance.clone(),
            seed: a.seed,
            out_dir: a.out_dir.clone(),
            workers: a.workers,
            tol: a.tol,
            max_iter: a.max_iter,
            repetitions: a.repetitions,
        }
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Command::Generate(a) => spec::resolve(&a.into(), false).and_then(|exp| generate(&exp)),
        Command::Run(a) => spec::resolve(&a.into(), false).and_then(|exp| run_experiment(&exp, false)),
        Command::Race(a) => spec::resolve(&a.into(), true).and_then(|exp| run_experiment(&exp, true)),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn generate(exp: &Experiment) -> Result<i32, CliError> {
    if matches!(exp.source, Source::File(_)) {
        return Err(CliError::Invalid("generate needs a seed, not an instance file".into()));
    }
    for rep in 0..exp.repetitions {
        let built = instance::build(exp, rep)?;
        let path = instance::save(&built, exp.app, &exp.out_dir)?;
        println!("{} {}", instance::fingerprint(&built.instance), path.display());
    }
    Ok(EXIT_OK)
}

fn run_experiment(exp: &Experiment, race: bool) -> Result<i32, CliError> {
    let done = runner::execute(exp)?;
    if race {
        let (csv, text) = runner::race_table(&done.labels, &done.first_traces);
        let path = exp.out_dir.join("race.csv");
        fs::write(&path, csv).map_err(|e| CliError::Failed(format!("{}: {e}", path.display())))?;
        print!("{text}");
    }
    for run in done.report.runs.iter().filter(|r| r.failure.is_some()) {
        eprintln!("{} repetition {}: {}", run.solver, run.repetition, run.failure.as_deref().unwrap_or_default());
    }
    for agg in &done.report.aggregates {
        println!(
            "{}: {}/{} reached tol {:e}; median iterations {}; median seconds to tol {}",
            agg.solver,
            agg.reached_tol,
            agg.runs,
            exp.tol,
            agg.median_iterations.map_or("-".into(), |v| v.to_string()),
            agg.median_seconds_to_tol.map_or("-".into(), |v| format!("{v:.4}")),
        );
    }
    Ok(if done.report.all_reached_tol() { EXIT_OK } else { EXIT_TOLERANCE })
}
