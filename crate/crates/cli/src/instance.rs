//! Building, persisting and fingerprinting problem instances.

use std::path::{Path, PathBuf};

use sca_kit::ee::EeInstance;
use sca_kit::io::{load_ee, load_lasso, load_mimo, save_ee, save_lasso, save_mimo, EeHeader};
use sca_kit::lasso::{LassoInstance, LassoSetup};
use sca_kit::mimo::MimoBcInstance;
use sha2::{Digest, Sha256};

use crate::spec::{App, Experiment, InstanceSpec, Source};
use crate::CliError;

pub enum Instance {
    Lasso(LassoInstance),
    /// Basis pursuit data share the LASSO file format; `mu` is unused.
    Bp(LassoInstance),
    MimoBc(MimoBcInstance),
    Ee(EeInstance),
}

pub struct Built {
    pub instance: Instance,
    pub seed: Option<u64>,
    pub file: Option<PathBuf>,
    /// Generator parameters echoed into saved headers.
    power_db: Option<f64>,
    antennas: Option<usize>,
    epsilon: Option<f64>,
}

fn lasso_setup(app: App, p: &InstanceSpec) -> LassoSetup {
    let (n, k) = match app {
        App::Bp => (20, 40),
        _ => (200, 400),
    };
    let mut s = LassoSetup::new(p.n.unwrap_or(n), p.k.unwrap_or(k));
    s.density = p.density.unwrap_or(s.density);
    s.noise_var = p.noise_var.unwrap_or(if app == App::Bp { 0.0 } else { s.noise_var });
    s.mu_factor = p.mu_factor.unwrap_or(s.mu_factor);
    s
}

/// Instance for repetition `rep`.
pub fn build(exp: &Experiment, rep: usize) -> Result<Built, CliError> {
    let invalid = |e: sca_kit::Error| CliError::Invalid(e.to_string());
    match &exp.source {
        Source::File(path) => {
            let instance = match exp.app {
                App::Lasso => Instance::Lasso(load_lasso(path).map_err(invalid)?),
                App::Bp => Instance::Bp(load_lasso(path).map_err(invalid)?),
                App::MimoBc => Instance::MimoBc(load_mimo(path).map_err(invalid)?),
                App::Ee => Instance::Ee(load_ee(path).map_err(invalid)?),
            };
            Ok(Built { instance, seed: None, file: Some(path.clone()), power_db: None, antennas: None, epsilon: None })
        }
        Source::Seeded { params: p, .. } => {
            let seed = exp.seed(rep).expect("seeded source");
            let (mut power_db, mut antennas, mut epsilon) = (None, None, None);
            let instance = match exp.app {
                App::Lasso => Instance::Lasso(lasso_setup(exp.app, p).generate(seed).map_err(invalid)?.0),
                App::Bp => Instance::Bp(lasso_setup(exp.app, p).generate(seed).map_err(invalid)?.0),
                App::MimoBc => {
                    let db = p.power_db.unwrap_or(10.0);
                    power_db = Some(db);
                    let inst = MimoBcInstance::random(p.users.unwrap_or(20), p.n_t.unwrap_or(4), p.n_r.unwrap_or(4), db, seed);
                    Instance::MimoBc(inst.map_err(invalid)?)
                }
                App::Ee => {
                    let (m, eps) = (p.antennas.unwrap_or(8), p.epsilon.unwrap_or(0.01));
                    antennas = Some(m);
                    epsilon = Some(eps);
                    Instance::Ee(EeInstance::random(p.users.unwrap_or(4), m, eps, seed).map_err(invalid)?)
                }
            };
            Ok(Built { instance, seed: Some(seed), file: None, power_db, antennas, epsilon })
        }
    }
}

/// Writes the instance into `dir` and returns the header path.
pub fn save(built: &Built, app: App, dir: &Path) -> Result<PathBuf, CliError> {
    let stem = match built.seed {
        Some(seed) => format!("{}_seed{seed}", app.name()),
        None => app.name().to_string(),
    };
    let io = |e: sca_kit::Error| CliError::Failed(e.to_string());
    match &built.instance {
        Instance::Lasso(inst) | Instance::Bp(inst) => save_lasso(inst, dir, &stem).map_err(io),
        Instance::MimoBc(inst) => {
            let power_db = built.power_db.unwrap_or(10.0 * inst.power().log10());
            save_mimo(inst, power_db, built.seed, dir, &stem).map_err(io)
        }
        Instance::Ee(inst) => {
            let header = EeHeader::explicit(inst, built.antennas, built.epsilon, built.seed);
            save_ee(&header, dir, &stem).map_err(io)
        }
    }
}

/// SHA-256 over a canonical little-endian encoding of the instance data.
pub fn fingerprint(instance: &Instance) -> String {
    let mut h = Sha256::new();
    let mut put = |values: &[f64]| values.iter().for_each(|v| h.update(v.to_le_bytes()));
    match instance {
        Instance::Lasso(inst) | Instance::Bp(inst) => {
            put(&[inst.n() as f64, inst.k() as f64, inst.mu()]);
            put(inst.a().as_slice());
            put(inst.b());
        }
        Instance::MimoBc(inst) => {
            put(&[inst.users() as f64, inst.n_t() as f64, inst.n_r() as f64, inst.power()]);
            for ch in inst.channels() {
                put(&ch.to_interleaved());
            }
        }
        Instance::Ee(inst) => {
            put(&[inst.users() as f64, inst.pc]);
            for row in &inst.w {
                put(row);
            }
            put(&inst.phi);
            put(&inst.sigma2);
            put(&inst.pmin);
            put(&inst.pmax);
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}
