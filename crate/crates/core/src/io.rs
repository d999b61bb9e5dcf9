//! Instance files.
//!
//! Every instance is a JSON header. Dense data lives in side files of
//! little-endian `f64` values in row-major order (complex entries as
//! interleaved `re, im` pairs); side file paths are relative to the header.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ee::EeInstance;
use crate::error::{Error, Result};
use crate::lasso::LassoInstance;
use crate::mimo::MimoBcInstance;
use crate::numerics::{CMatrix, Matrix};

pub fn write_f64_le(path: &Path, values: &[f64]) -> Result<()> {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(path, bytes)?;
    Ok(())
}

pub fn read_f64_le(path: &Path) -> Result<Vec<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Format(format!("{}: length {} is not a multiple of 8", path.display(), bytes.len())));
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8"))).collect())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn sibling(header: &Path, name: &str) -> PathBuf {
    header.parent().unwrap_or_else(|| Path::new(".")).join(name)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoHeader {
    pub n: usize,
    pub k: usize,
    pub mu: f64,
    pub matrix_file: String,
    pub vector_file: String,
}

/// Writes `<stem>.json`, `<stem>.A.bin` and `<stem>.b.bin` into `dir`.
pub fn save_lasso(inst: &LassoInstance, dir: &Path, stem: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let header = LassoHeader {
        n: inst.n(),
        k: inst.k(),
        mu: inst.mu(),
        matrix_file: format!("{stem}.A.bin"),
        vector_file: format!("{stem}.b.bin"),
    };
    write_f64_le(&dir.join(&header.matrix_file), inst.a().as_slice())?;
    write_f64_le(&dir.join(&header.vector_file), inst.b())?;
    let path = dir.join(format!("{stem}.json"));
    write_json(&path, &header)?;
    Ok(path)
}

pub fn load_lasso(header_path: &Path) -> Result<LassoInstance> {
    let h: LassoHeader = read_json(header_path)?;
    let a = read_f64_le(&sibling(header_path, &h.matrix_file))?;
    if a.len() != h.n * h.k {
        return Err(Error::Format(format!("matrix file holds {} values, header says {}x{}", a.len(), h.n, h.k)));
    }
    let b = read_f64_le(&sibling(header_path, &h.vector_file))?;
    if b.len() != h.n {
        return Err(Error::Format(format!("vector file holds {} values, header says {}", b.len(), h.n)));
    }
    LassoInstance::new(Matrix::from_row_major(h.n, h.k, a)?, b, h.mu)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MimoHeader {
    #[serde(rename = "K")]
    pub users: usize,
    #[serde(rename = "nT")]
    pub n_t: usize,
    #[serde(rename = "nR")]
    pub n_r: usize,
    #[serde(rename = "P_dB")]
    pub power_db: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// One file per user; takes precedence over `seed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel_files: Option<Vec<String>>,
}

pub fn save_mimo(inst: &MimoBcInstance, power_db: f64, seed: Option<u64>, dir: &Path, stem: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::with_capacity(inst.users());
    for (k, h) in inst.channels().iter().enumerate() {
        let name = format!("{stem}.H{k}.bin");
        write_f64_le(&dir.join(&name), &h.to_interleaved())?;
        files.push(name);
    }
    let header = MimoHeader {
        users: inst.users(),
        n_t: inst.n_t(),
        n_r: inst.n_r(),
        power_db,
        seed,
        channel_files: Some(files),
    };
    let path = dir.join(format!("{stem}.json"));
    write_json(&path, &header)?;
    Ok(path)
}

pub fn load_mimo(header_path: &Path) -> Result<MimoBcInstance> {
    let h: MimoHeader = read_json(header_path)?;
    mimo_from_header(&h, header_path)
}

pub fn mimo_from_header(h: &MimoHeader, header_path: &Path) -> Result<MimoBcInstance> {
    match (&h.channel_files, h.seed) {
        (Some(files), _) => {
            if files.len() != h.users {
                return Err(Error::Format(format!("{} channel files for {} users", files.len(), h.users)));
            }
            let channels = files
                .iter()
                .map(|f| CMatrix::from_interleaved(h.n_r, h.n_t, &read_f64_le(&sibling(header_path, f))?))
                .collect::<Result<Vec<_>>>()?;
            MimoBcInstance::from_db(channels, h.power_db)
        }
        (None, Some(seed)) => MimoBcInstance::random(h.users, h.n_t, h.n_r, h.power_db, seed),
        (None, None) => Err(Error::Format("MIMO header needs a seed or channel files".into())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EeHeader {
    #[serde(rename = "K")]
    pub users: usize,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub antennas: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2: Option<Vec<f64>>,
    #[serde(rename = "Pc", default, skip_serializing_if = "Option::is_none")]
    pub pc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pmin: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pmax: Option<Vec<f64>>,
}

impl EeHeader {
    pub fn explicit(inst: &EeInstance, antennas: Option<usize>, epsilon: Option<f64>, seed: Option<u64>) -> Self {
        EeHeader {
            users: inst.users(),
            antennas,
            epsilon,
            seed,
            w: Some(inst.w.clone()),
            phi: Some(inst.phi.clone()),
            sigma2: Some(inst.sigma2.clone()),
            pc: Some(inst.pc),
            pmin: Some(inst.pmin.clone()),
            pmax: Some(inst.pmax.clone()),
        }
    }

    /// Explicit arrays take precedence over `(M, epsilon, seed)`.
    pub fn instance(&self) -> Result<EeInstance> {
        if let (Some(w), Some(phi), Some(sigma2), Some(pc), Some(pmin), Some(pmax)) =
            (&self.w, &self.phi, &self.sigma2, self.pc, &self.pmin, &self.pmax)
        {
            let inst = EeInstance::new(w.clone(), phi.clone(), sigma2.clone(), pc, pmin.clone(), pmax.clone())?;
            if inst.users() != self.users {
                return Err(Error::Format(format!("K = {} but arrays describe {} users", self.users, inst.users())));
            }
            return Ok(inst);
        }
        match (self.antennas, self.seed) {
            (Some(m), Some(seed)) => EeInstance::random(self.users, m, self.epsilon.unwrap_or(0.01), seed),
            _ => Err(Error::Format("EE header needs explicit arrays or M and seed".into())),
        }
    }
}

pub fn save_ee(header: &EeHeader, dir: &Path, stem: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(format!("{stem}.json"));
    write_json(&path, header)?;
    Ok(path)
}

pub fn load_ee(header_path: &Path) -> Result<EeInstance> {
    read_json::<EeHeader>(header_path)?.instance()
}
