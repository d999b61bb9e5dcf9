//! Experiment specifications: the JSON file given by `--spec`, merged with
//! command-line overrides into a validated [`Experiment`].

use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use sca_kit::StepsizeRule;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum App {
    Lasso,
    Bp,
    MimoBc,
    Ee,
}

impl App {
    pub fn name(self) -> &'static str {
        match self {
            App::Lasso => "lasso",
            App::Bp => "bp",
            App::MimoBc => "mimo-bc",
            App::Ee => "ee",
        }
    }

    fn default_tol(self) -> f64 {
        match self {
            App::Lasso | App::Bp => 1e-6,
            App::MimoBc => 1e-5,
            App::Ee => 1e-5,
        }
    }

    fn default_max_iter(self) -> usize {
        match self {
            App::Lasso => 10_000,
            App::Bp => 50,
            App::MimoBc => 1000,
            App::Ee => 200,
        }
    }

    fn default_solvers(self, race: bool) -> Vec<SolverConfig> {
        match (self, race) {
            (App::Lasso, false) => vec![SolverConfig::Stela],
            (App::Lasso, true) => vec![
                SolverConfig::Stela,
                SolverConfig::Flexa { rate: 1e-2, gamma0: default_gamma0() },
                SolverConfig::Flexa { rate: 1e-1, gamma0: default_gamma0() },
            ],
            (App::Bp, _) => vec![SolverConfig::BasisPursuit],
            (App::MimoBc, false) => vec![SolverConfig::Waterfill { step: Some(Step::Exact) }],
            (App::MimoBc, true) => vec![
                SolverConfig::Waterfill { step: Some(Step::Exact) },
                SolverConfig::Waterfill { step: Some(Step::InverseUsers) },
            ],
            (App::Ee, false) => vec![SolverConfig::Dinkelbach { step: None }],
            (App::Ee, true) => vec![
                SolverConfig::Dinkelbach { step: None },
                SolverConfig::Dinkelbach { step: Some(Step::Decreasing { initial: 1.0, rate: 1e-2 }) },
            ],
        }
    }
}

/// Contents of a `--spec` file. Every field is optional; command-line
/// flags override the file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub app: Option<App>,
    #[serde(default)]
    pub instance: InstanceSpec,
    #[serde(default)]
    pub solvers: Vec<SolverConfig>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub repetitions: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub workers: Option<usize>,
}

/// Instance source: a header file written by `generate`, or generator
/// parameters plus a seed. Parameters that do not apply to the chosen
/// application are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSpec {
    pub file: Option<PathBuf>,
    pub seed: Option<u64>,
    pub n: Option<usize>,
    pub k: Option<usize>,
    pub density: Option<f64>,
    pub noise_var: Option<f64>,
    pub mu_factor: Option<f64>,
    pub users: Option<usize>,
    pub n_t: Option<usize>,
    pub n_r: Option<usize>,
    pub power_db: Option<f64>,
    pub antennas: Option<usize>,
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "solver", rename_all = "snake_case")]
pub enum SolverConfig {
    Stela,
    Flexa {
        rate: f64,
        #[serde(default = "default_gamma0")]
        gamma0: f64,
    },
    BasisPursuit,
    Waterfill {
        #[serde(default)]
        step: Option<Step>,
    },
    Dinkelbach {
        #[serde(default)]
        step: Option<Step>,
    },
}

fn default_gamma0() -> f64 {
    0.9
}

impl SolverConfig {
    pub fn label(&self) -> String {
        match self {
            SolverConfig::Stela => "stela".into(),
            SolverConfig::Flexa { rate, .. } => format!("flexa_d{rate}"),
            SolverConfig::BasisPursuit => "bp".into(),
            SolverConfig::Waterfill { step } => format!("waterfill_{}", step.unwrap_or(Step::Exact).label()),
            SolverConfig::Dinkelbach { step } => format!("dinkelbach_{}", step.unwrap_or_default().label()),
        }
    }

    fn app(&self) -> App {
        match self {
            SolverConfig::Stela | SolverConfig::Flexa { .. } => App::Lasso,
            SolverConfig::BasisPursuit => App::Bp,
            SolverConfig::Waterfill { .. } => App::MimoBc,
            SolverConfig::Dinkelbach { .. } => App::Ee,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Step {
    Exact,
    #[default]
    Armijo,
    ArmijoWith {
        alpha: f64,
        beta: f64,
    },
    Constant {
        gamma: f64,
    },
    Decreasing {
        initial: f64,
        rate: f64,
    },
    /// Constant `1/K` with `K` the number of users.
    InverseUsers,
}

impl Step {
    pub fn label(&self) -> String {
        match self {
            Step::Exact => "exact".into(),
            Step::Armijo => "armijo".into(),
            Step::ArmijoWith { alpha, beta } => format!("armijo_{alpha}_{beta}"),
            Step::Constant { gamma } => format!("constant_{gamma}"),
            Step::Decreasing { rate, .. } => format!("decreasing_{rate}"),
            Step::InverseUsers => "inverse_users".into(),
        }
    }

    pub fn rule(&self, users: usize) -> StepsizeRule {
        match *self {
            Step::Exact => StepsizeRule::ExactBisection,
            Step::Armijo => StepsizeRule::armijo(),
            Step::ArmijoWith { alpha, beta } => StepsizeRule::Armijo { alpha, beta },
            Step::Constant { gamma } => StepsizeRule::Constant { gamma },
            Step::Decreasing { initial, rate } => StepsizeRule::Decreasing { initial, rate },
            Step::InverseUsers => StepsizeRule::Constant { gamma: 1.0 / users.max(1) as f64 },
        }
    }
}

/// Command-line values that override the spec file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub app: Option<App>,
    pub spec: Option<PathBuf>,
    pub instance: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub workers: Option<usize>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub repetitions: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    File(PathBuf),
    Seeded { seed: u64, params: InstanceSpec },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub app: App,
    pub source: Source,
    pub solvers: Vec<SolverConfig>,
    pub tol: f64,
    pub max_iter: usize,
    pub repetitions: usize,
    pub out_dir: PathBuf,
    pub workers: usize,
}

impl Experiment {
    /// Seed used for repetition `rep`, if the instance is generated.
    pub fn seed(&self, rep: usize) -> Option<u64> {
        match &self.source {
            Source::Seeded { seed, .. } => Some(seed + rep as u64),
            Source::File(_) => None,
        }
    }
}

pub fn load_spec(path: &Path) -> Result<ExperimentSpec, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

pub fn resolve(o: &Overrides, race: bool) -> Result<Experiment, CliError> {
    let invalid = |msg: String| Err(CliError::Invalid(msg));
    let spec = match &o.spec {
        Some(path) => load_spec(path)?,
        None => ExperimentSpec::default(),
    };
    let Some(app) = o.app.or(spec.app) else {
        return invalid("no application given (use --app or \"app\" in the spec)".into());
    };
    if let (Some(a), Some(b)) = (o.app, spec.app) {
        if a != b {
            return invalid(format!("--app {} conflicts with spec app {}", a.name(), b.name()));
        }
    }

    let mut params = spec.instance.clone();
    check_params(app, &params)?;
    let file = o.instance.clone().or(params.file.take());
    let source = match file {
        Some(path) => {
            if !path.is_file() {
                return invalid(format!("instance file {} does not exist", path.display()));
            }
            Source::File(path)
        }
        None => Source::Seeded { seed: o.seed.or(params.seed).unwrap_or(0), params },
    };

    let solvers = if spec.solvers.is_empty() { app.default_solvers(race) } else { spec.solvers.clone() };
    for s in &solvers {
        if s.app() != app {
            return invalid(format!("solver {} does not apply to {}", s.label(), app.name()));
        }
        validate_solver(s)?;
    }
    if race && solvers.len() < 2 {
        return invalid("a race needs at least two solver configurations".into());
    }

    let tol = o.tol.or(spec.tol).unwrap_or(app.default_tol());
    if !(tol > 0.0 && tol.is_finite()) {
        return invalid(format!("tolerance must be positive, got {tol}"));
    }
    let max_iter = o.max_iter.or(spec.max_iter).unwrap_or(app.default_max_iter());
    let repetitions = o.repetitions.or(spec.repetitions).unwrap_or(1);
    if repetitions == 0 {
        return invalid("repetitions must be at least 1".into());
    }
    let workers = o.workers.or(spec.workers).unwrap_or(1);
    if workers == 0 {
        return invalid("workers must be at least 1".into());
    }
    let out_dir = o.out_dir.clone().or(spec.out_dir).unwrap_or_else(|| PathBuf::from("out"));
    Ok(Experiment { app, source, solvers, tol, max_iter, repetitions, out_dir, workers })
}

fn check_params(app: App, p: &InstanceSpec) -> Result<(), CliError> {
    let foreign: Vec<&str> = [
        ("n", p.n.is_some(), matches!(app, App::Lasso | App::Bp)),
        ("k", p.k.is_some(), matches!(app, App::Lasso | App::Bp)),
        ("density", p.density.is_some(), matches!(app, App::Lasso | App::Bp)),
        ("noise_var", p.noise_var.is_some(), matches!(app, App::Lasso | App::Bp)),
        ("mu_factor", p.mu_factor.is_some(), app == App::Lasso),
        ("users", p.users.is_some(), matches!(app, App::MimoBc | App::Ee)),
        ("n_t", p.n_t.is_some(), app == App::MimoBc),
        ("n_r", p.n_r.is_some(), app == App::MimoBc),
        ("power_db", p.power_db.is_some(), app == App::MimoBc),
        ("antennas", p.antennas.is_some(), app == App::Ee),
        ("epsilon", p.epsilon.is_some(), app == App::Ee),
    ]
    .into_iter()
    .filter(|(_, given, allowed)| *given && !allowed)
    .map(|(name, _, _)| name)
    .collect();
    if foreign.is_empty() {
        Ok(())
    } else {
        Err(CliError::Invalid(format!("instance parameters {foreign:?} do not apply to {}", app.name())))
    }
}

fn validate_solver(s: &SolverConfig) -> Result<(), CliError> {
    let step = match s {
        SolverConfig::Flexa { rate, gamma0 } => {
            if !(0.0..=1.0).contains(rate) || !(*gamma0 > 0.0 && *gamma0 <= 1.0) {
                return Err(CliError::Invalid(format!("flexa needs rate in [0,1] and gamma0 in (0,1], got {rate}, {gamma0}")));
            }
            return Ok(());
        }
        SolverConfig::Waterfill { step } | SolverConfig::Dinkelbach { step } => step.unwrap_or_default(),
        _ => return Ok(()),
    };
    step.rule(1).validate().map_err(|e| CliError::Invalid(e.to_string()))
}
