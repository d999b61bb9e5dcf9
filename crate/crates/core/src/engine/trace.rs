use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One row of an iteration trace, describing iterate `x^t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub iter: usize,
    pub objective: f64,
    /// Stepsize used to leave `x^t`; `None` on the terminal row.
    pub gamma: Option<f64>,
    pub error: f64,
    pub seconds: f64,
    /// Application-level value (sum rate, energy efficiency) if any.
    pub extra: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIterations,
    /// The best response did not yield a descent direction.
    NonDescent,
    /// Iterate magnitude exceeded the divergence guard.
    Diverged,
    /// `Bx = x` up to rounding while the stationarity error stays above
    /// the tolerance.
    Stalled,
}

/// Recoverable diagnostics collected during a solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Notice {
    /// `grad f(x)^T (Bx - x) >= 0` although `Bx != x`.
    NonDescentDirection { iter: usize, slope: f64, step_norm: f64 },
    /// Exact line search requested on a problem not declared convex.
    ExactFallbackToArmijo { iter: usize },
    /// Proximal step larger than `1/L`.
    UpperBoundNotGuaranteed { step: f64, bound: f64 },
    /// A closed-form inner solution disagreed with its scalar oracle.
    ClosedFormFallback { iter: usize, block: usize, deviation: f64 },
    ResidualResync { iter: usize, drift: f64 },
}

impl Notice {
    pub fn is_non_descent(&self) -> bool {
        matches!(self, Notice::NonDescentDirection { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterateTrace {
    pub records: Vec<IterRecord>,
    pub termination: Termination,
    pub notices: Vec<Notice>,
}

impl IterateTrace {
    pub fn new() -> Self {
        IterateTrace {
            records: Vec::new(),
            termination: Termination::MaxIterations,
            notices: Vec::new(),
        }
    }

    /// Number of updates performed.
    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }

    pub fn last(&self) -> Option<&IterRecord> {
        self.records.last()
    }

    pub fn final_error(&self) -> f64 {
        self.last().map_or(f64::NAN, |r| r.error)
    }

    pub fn final_objective(&self) -> f64 {
        self.last().map_or(f64::NAN, |r| r.objective)
    }

    /// First iteration index whose error is at most `tol`.
    pub fn iterations_to(&self, tol: f64) -> Option<usize> {
        self.records.iter().find(|r| r.error <= tol).map(|r| r.iter)
    }

    pub fn seconds_to(&self, tol: f64) -> Option<f64> {
        self.records.iter().find(|r| r.error <= tol).map(|r| r.seconds)
    }

    pub fn objectives(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.objective).collect()
    }

    /// True when no objective value exceeds its predecessor by more than
    /// `slack * (1 + |previous|)`.
    pub fn is_nonincreasing(&self, slack: f64) -> bool {
        self.records
            .windows(2)
            .all(|w| w[1].objective <= w[0].objective + slack * (1.0 + w[0].objective.abs()))
    }

    pub fn has_non_descent_notice(&self) -> bool {
        self.notices.iter().any(Notice::is_non_descent)
    }

    pub(crate) fn push_notice(&mut self, notice: Notice) {
        log::info!("{notice:?}");
        self.notices.push(notice);
    }

    /// Writes `iter,objective,gamma,error,seconds[,extra]`.
    pub fn write_csv<W: Write>(&self, mut out: W, extra_column: Option<&str>) -> Result<()> {
        match extra_column {
            Some(name) => writeln!(out, "iter,objective,gamma,error,seconds,{name}")?,
            None => writeln!(out, "iter,objective,gamma,error,seconds")?,
        }
        for r in &self.records {
            let gamma = r.gamma.map(fmt_f64).unwrap_or_default();
            write!(
                out,
                "{},{},{},{},{}",
                r.iter,
                fmt_f64(r.objective),
                gamma,
                fmt_f64(r.error),
                fmt_f64(r.seconds)
            )?;
            if extra_column.is_some() {
                write!(out, ",{}", r.extra.map(fmt_f64).unwrap_or_default())?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    /// Reads records back from [`IterateTrace::write_csv`] output. The
    /// termination reason is not stored in the CSV and is reconstructed
    /// as `MaxIterations`.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Vec<IterRecord>> {
        let mut lines = input.lines();
        let header = lines.next().ok_or_else(|| Error::Format("empty trace".into()))??;
        let has_extra = header.split(',').count() == 6;
        let mut records = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() < 5 {
                return Err(Error::Format(format!("short trace row: {line}")));
            }
            let num = |s: &str| -> Result<f64> {
                s.parse::<f64>().map_err(|e| Error::Format(format!("{s}: {e}")))
            };
            let opt = |s: &str| -> Result<Option<f64>> {
                if s.is_empty() {
                    Ok(None)
                } else {
                    num(s).map(Some)
                }
            };
            records.push(IterRecord {
                iter: f[0].parse().map_err(|e| Error::Format(format!("{}: {e}", f[0])))?,
                objective: num(f[1])?,
                gamma: opt(f[2])?,
                error: num(f[3])?,
                seconds: num(f[4])?,
                extra: if has_extra { opt(f.get(5).copied().unwrap_or(""))? } else { None },
            });
        }
        Ok(records)
    }
}

impl Default for IterateTrace {
    fn default() -> Self {
        Self::new()
    }
}

/// Shortest representation that parses back to the same bits.
fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}
