//! Solver execution, trace export and run reports.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use rayon::prelude::*;
use sca_kit::ee::{ee_solve, EeOptions};
use sca_kit::engine::{IterateTrace, StopCriteria, Termination};
use sca_kit::lasso::{basis_pursuit_solve, flexa_baseline, stela_solve, BpOptions, FlexaOptions, StelaOptions};
use sca_kit::mimo::bc_solve;
use serde::{Deserialize, Serialize};

use crate::instance::{self, Built, Instance};
use crate::spec::{App, Experiment, SolverConfig, Step};
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceInfo {
    pub repetition: usize,
    pub seed: Option<u64>,
    pub file: Option<String>,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub solver: String,
    pub repetition: usize,
    pub instance_sha256: String,
    /// Relative to the output directory; absent when the solver failed.
    pub trace_file: Option<String>,
    pub termination: Option<Termination>,
    pub reached_tol: bool,
    pub iterations: Option<usize>,
    pub iterations_to_tol: Option<usize>,
    pub seconds_to_tol: Option<f64>,
    pub final_objective: Option<f64>,
    pub final_error: Option<f64>,
    /// Final sum rate (mimo-bc) or energy efficiency (ee).
    pub final_value: Option<f64>,
    pub notices: usize,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub solver: String,
    pub runs: usize,
    pub reached_tol: usize,
    pub median_iterations: Option<f64>,
    pub median_seconds_to_tol: Option<f64>,
    pub median_final_objective: Option<f64>,
    pub median_final_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub app: App,
    pub tol: f64,
    pub max_iter: usize,
    pub repetitions: usize,
    pub instances: Vec<InstanceInfo>,
    pub runs: Vec<RunSummary>,
    pub aggregates: Vec<Aggregate>,
}

impl RunReport {
    pub fn all_reached_tol(&self) -> bool {
        self.runs.iter().all(|r| r.reached_tol)
    }
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    Some(if values.len() % 2 == 1 { values[m] } else { 0.5 * (values[m - 1] + values[m]) })
}

/// Medians over the runs of each solver, in first-appearance order.
pub fn aggregate(runs: &[RunSummary]) -> Vec<Aggregate> {
    let mut order: Vec<&str> = Vec::new();
    let mut groups: HashMap<&str, Vec<&RunSummary>> = HashMap::new();
    for r in runs {
        if !groups.contains_key(r.solver.as_str()) {
            order.push(&r.solver);
        }
        groups.entry(&r.solver).or_default().push(r);
    }
    order
        .into_iter()
        .map(|solver| {
            let g = &groups[solver];
            let collect = |f: &dyn Fn(&RunSummary) -> Option<f64>| g.iter().filter_map(|r| f(r)).collect::<Vec<f64>>();
            Aggregate {
                solver: solver.to_string(),
                runs: g.len(),
                reached_tol: g.iter().filter(|r| r.reached_tol).count(),
                median_iterations: median(&mut collect(&|r| r.iterations.map(|i| i as f64))),
                median_seconds_to_tol: median(&mut collect(&|r| r.seconds_to_tol)),
                median_final_objective: median(&mut collect(&|r| r.final_objective)),
                median_final_error: median(&mut collect(&|r| r.final_error)),
            }
        })
        .collect()
}

/// Labels made unique by suffixing repeats with their position.
fn labels(solvers: &[SolverConfig]) -> Vec<String> {
    let mut seen: HashMap<String, usize> = HashMap::new();
    solvers
        .iter()
        .map(|s| {
            let base = s.label();
            let count = seen.entry(base.clone()).or_insert(0);
            *count += 1;
            if *count == 1 {
                base
            } else {
                format!("{base}_{count}")
            }
        })
        .collect()
}

fn solve(app: App, built: &Built, solver: &SolverConfig, exp: &Experiment) -> sca_kit::Result<IterateTrace> {
    let stop = StopCriteria::new(exp.tol, exp.max_iter);
    let stela = StelaOptions { tol: exp.tol, max_iter: exp.max_iter, workers: 1 };
    match (&built.instance, solver) {
        (Instance::Lasso(inst), SolverConfig::Stela) => Ok(stela_solve(inst, &stela)?.trace),
        (Instance::Lasso(inst), SolverConfig::Flexa { rate, gamma0 }) => {
            let flexa = FlexaOptions { gamma0: *gamma0, ..FlexaOptions::with_rate(*rate) };
            Ok(flexa_baseline(inst, &flexa, &stela)?.trace)
        }
        (Instance::Bp(inst), SolverConfig::BasisPursuit) => {
            let opts = BpOptions { max_outer: exp.max_iter, lambda_tol: exp.tol, ..BpOptions::default() };
            Ok(basis_pursuit_solve(inst.a(), inst.b(), &opts)?.trace)
        }
        (Instance::MimoBc(inst), SolverConfig::Waterfill { step }) => {
            let rule = step.unwrap_or(Step::Exact).rule(inst.users());
            Ok(bc_solve(inst, rule, stop)?.trace)
        }
        (Instance::Ee(inst), SolverConfig::Dinkelbach { step }) => {
            let opts = EeOptions { step: step.unwrap_or_default().rule(inst.users()), stop, ..EeOptions::default() };
            Ok(ee_solve(inst, &opts)?.trace)
        }
        _ => unreachable!("solver {} validated against {}", solver.label(), app.name()),
    }
}

fn extra_column(app: App) -> Option<&'static str> {
    match app {
        App::MimoBc => Some("sum_rate"),
        App::Ee => Some("ee"),
        App::Lasso | App::Bp => None,
    }
}

pub fn write_trace(trace: &IterateTrace, app: App, path: &Path) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::Failed(format!("{}: {e}", path.display())))?;
    trace.write_csv(BufWriter::new(file), extra_column(app)).map_err(|e| CliError::Failed(e.to_string()))
}

struct Repetition {
    info: InstanceInfo,
    runs: Vec<RunSummary>,
    traces: Vec<Option<IterateTrace>>,
}

fn run_repetition(exp: &Experiment, rep: usize, names: &[String]) -> Result<Repetition, CliError> {
    let built = instance::build(exp, rep)?;
    let sha = instance::fingerprint(&built.instance);
    let info = InstanceInfo {
        repetition: rep,
        seed: built.seed,
        file: built.file.as_ref().map(|p| p.display().to_string()),
        sha256: sha.clone(),
    };
    let mut runs = Vec::new();
    let mut traces = Vec::new();
    for (solver, name) in exp.solvers.iter().zip(names) {
        let mut summary = RunSummary {
            solver: name.clone(),
            repetition: rep,
            instance_sha256: sha.clone(),
            trace_file: None,
            termination: None,
            reached_tol: false,
            iterations: None,
            iterations_to_tol: None,
            seconds_to_tol: None,
            final_objective: None,
            final_error: None,
            final_value: None,
            notices: 0,
            failure: None,
        };
        match solve(exp.app, &built, solver, exp) {
            Ok(trace) => {
                let file = format!("{name}_r{rep}.csv");
                write_trace(&trace, exp.app, &exp.out_dir.join(&file))?;
                log::info!("{name} repetition {rep}: {:?} after {} iterations", trace.termination, trace.iterations());
                summary.trace_file = Some(file);
                summary.termination = Some(trace.termination);
                summary.reached_tol = trace.converged();
                summary.iterations = Some(trace.iterations());
                summary.iterations_to_tol = trace.iterations_to(exp.tol);
                summary.seconds_to_tol = trace.seconds_to(exp.tol);
                summary.final_objective = Some(trace.final_objective());
                summary.final_error = Some(trace.final_error());
                summary.final_value = trace.last().and_then(|r| r.extra);
                summary.notices = trace.notices.len();
                traces.push(Some(trace));
            }
            Err(e) => {
                log::warn!("{name} repetition {rep} failed: {e}");
                summary.failure = Some(e.to_string());
                traces.push(None);
            }
        }
        runs.push(summary);
    }
    Ok(Repetition { info, runs, traces })
}

pub struct Executed {
    pub report: RunReport,
    pub labels: Vec<String>,
    /// Traces of the first repetition, one per solver.
    pub first_traces: Vec<Option<IterateTrace>>,
}

/// Runs every solver on every repetition and writes traces plus
/// `report.json` into the output directory.
pub fn execute(exp: &Experiment) -> Result<Executed, CliError> {
    fs::create_dir_all(&exp.out_dir).map_err(|e| CliError::Failed(format!("{}: {e}", exp.out_dir.display())))?;
    let names = labels(&exp.solvers);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(exp.workers)
        .build()
        .map_err(|e| CliError::Failed(e.to_string()))?;
    let reps: Vec<Repetition> = pool.install(|| {
        (0..exp.repetitions).into_par_iter().map(|rep| run_repetition(exp, rep, &names)).collect::<Result<_, _>>()
    })?;

    let mut instances = Vec::new();
    let mut runs = Vec::new();
    let mut first_traces = Vec::new();
    for (i, rep) in reps.into_iter().enumerate() {
        instances.push(rep.info);
        runs.extend(rep.runs);
        if i == 0 {
            first_traces = rep.traces;
        }
    }
    let aggregates = aggregate(&runs);
    let report = RunReport {
        app: exp.app,
        tol: exp.tol,
        max_iter: exp.max_iter,
        repetitions: exp.repetitions,
        instances,
        runs,
        aggregates,
    };
    let path = exp.out_dir.join("report.json");
    let text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Failed(e.to_string()))? + "\n";
    fs::write(&path, text).map_err(|e| CliError::Failed(format!("{}: {e}", path.display())))?;
    Ok(Executed { report, labels: names, first_traces })
}

fn cell(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.6e}")).unwrap_or_default()
}

/// Iteration-aligned error table of the first repetition, as CSV and as
/// fixed-width text.
pub fn race_table(labels: &[String], traces: &[Option<IterateTrace>]) -> (String, String) {
    let rows = traces.iter().flatten().map(|t| t.records.len()).max().unwrap_or(0);
    let width = labels.iter().map(String::len).max().unwrap_or(0).max(12);
    let mut csv = String::from("iter");
    let mut text = format!("{:>6}", "iter");
    for l in labels {
        csv.push(',');
        csv.push_str(l);
        let _ = write!(text, "  {l:>width$}");
    }
    csv.push('\n');
    text.push('\n');
    for i in 0..rows {
        let _ = write!(csv, "{i}");
        let _ = write!(text, "{i:>6}");
        for t in traces {
            let v = t.as_ref().and_then(|t| t.records.get(i)).map(|r| r.error);
            let _ = write!(csv, ",{}", cell(v));
            let _ = write!(text, "  {:>width$}", cell(v));
        }
        csv.push('\n');
        text.push('\n');
    }
    (csv, text)
}
