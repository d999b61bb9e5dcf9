//! Sum capacity of the MIMO broadcast channel through its dual multiple
//! access form
//!
//! ```text
//! maximize log det(I + sum_k H_k Q_k H_k^H)
//! s.t.     Q_k PSD, sum_k tr(Q_k) <= P
//! ```
//!
//! Each iteration keeps the other users' covariances frozen in
//! `R_k = I + sum_{j != k} H_j Q_j H_j^H`, solves the resulting concave
//! per-user problems jointly by waterfilling under a common multiplier, and
//! moves toward that point with an exact line search.

use rayon::prelude::*;

use crate::engine::{
    solve_smooth, ApproximationRule, FeasibleSet, SmoothProblem, Solution, StepsizeRule, StopCriteria,
};
use crate::error::{Error, Result};
use crate::numerics::{bisect_root_with, hermitian_eig, CMatrix, HermitianEig, HermitianMatrix, Interval};
use crate::rng::SeededRng;

/// Eigenvalues above `-PSD_TOL` are clipped to zero; lower ones are errors.
pub const PSD_TOL: f64 = 1e-9;
/// Lower end of the multiplier bracket.
pub const LAMBDA_FLOOR: f64 = 1e-12;
/// Relative tolerance on the total power at the multiplier found by
/// bisection.
pub const POWER_TOL: f64 = 1e-10;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[derive(Debug, Clone)]
pub struct MimoBcInstance {
    h: Vec<CMatrix>,
    power: f64,
    n_t: usize,
    n_r: usize,
}

impl MimoBcInstance {
    /// Channels `H_k` (`n_R x n_T` each) and a linear power budget.
    pub fn new(h: Vec<CMatrix>, power: f64) -> Result<Self> {
        let first = h.first().ok_or_else(|| Error::InvalidInstance("no users".into()))?;
        let (n_r, n_t) = (first.rows(), first.cols());
        if n_r == 0 || n_t == 0 {
            return Err(Error::InvalidInstance("empty channel matrix".into()));
        }
        for hk in &h {
            if hk.rows() != n_r || hk.cols() != n_t {
                return Err(Error::InvalidInstance(format!(
                    "channel is {}x{}, expected {n_r}x{n_t}",
                    hk.rows(),
                    hk.cols()
                )));
            }
            if hk.as_slice().iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::InvalidInstance("non-finite channel entry".into()));
            }
        }
        if !(power > 0.0) || !power.is_finite() {
            return Err(Error::InvalidInstance(format!("power budget must be positive, got {power}")));
        }
        Ok(MimoBcInstance { h, power, n_t, n_r })
    }

    pub fn from_db(h: Vec<CMatrix>, power_db: f64) -> Result<Self> {
        Self::new(h, db_to_linear(power_db))
    }

    /// I.i.d. unit-variance complex Gaussian channels.
    pub fn random(users: usize, n_t: usize, n_r: usize, power_db: f64, seed: u64) -> Result<Self> {
        let mut rng = SeededRng::new(seed);
        let h = (0..users)
            .map(|_| {
                let data = (0..n_r * n_t).map(|_| rng.complex_gaussian()).collect();
                CMatrix::from_row_major(n_r, n_t, data)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_db(h, power_db)
    }

    pub fn users(&self) -> usize {
        self.h.len()
    }

    pub fn channels(&self) -> &[CMatrix] {
        &self.h
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn zero_point(&self) -> Vec<CMatrix> {
        vec![CMatrix::zeros(self.n_t, self.n_t); self.users()]
    }

    fn check_point(&self, q: &[CMatrix]) -> Result<()> {
        if q.len() != self.users() {
            return Err(Error::DimensionMismatch { expected: self.users(), got: q.len() });
        }
        for qk in q {
            if qk.rows() != self.n_t || qk.cols() != self.n_t {
                return Err(Error::DimensionMismatch { expected: self.n_t, got: qk.rows() });
            }
        }
        Ok(())
    }

    /// `I + sum_k H_k Q_k H_k^H`.
    pub fn covariance(&self, q: &[CMatrix]) -> Result<CMatrix> {
        self.check_point(q)?;
        let mut m = CMatrix::identity(self.n_r);
        for (hk, qk) in self.h.iter().zip(q) {
            m = m.add(&hk.congruence(qk));
        }
        m.symmetrize();
        Ok(m)
    }

    /// Total power `sum_k tr(Q_k)`.
    pub fn total_power(q: &[CMatrix]) -> f64 {
        q.iter().map(|qk| qk.trace().re).sum()
    }

    /// Feasibility within the PSD and budget tolerances.
    pub fn is_feasible(&self, q: &[CMatrix]) -> bool {
        self.check_point(q).is_ok()
            && Self::total_power(q) <= self.power * (1.0 + PSD_TOL)
            && q.iter().all(|qk| min_eigenvalue(qk) >= -PSD_TOL * (1.0 + qk.max_abs()))
    }
}

fn hermitian(m: &CMatrix) -> Result<HermitianMatrix> {
    let mut m = m.clone();
    m.symmetrize();
    HermitianMatrix::new(m)
}

fn min_eigenvalue(q: &CMatrix) -> f64 {
    hermitian(q).map(|m| hermitian_eig(&m).values.last().copied().unwrap_or(0.0)).unwrap_or(f64::NEG_INFINITY)
}

/// Sum rate `log det(I + sum_k H_k Q_k H_k^H)` in nats.
pub fn bc_objective(q: &[CMatrix], inst: &MimoBcInstance) -> Result<f64> {
    inst.covariance(q)?.logdet_hpd()
}

/// Gradient of the sum rate: `H_k^H M^{-1} H_k` for every user.
pub fn bc_gradient(q: &[CMatrix], inst: &MimoBcInstance) -> Result<Vec<CMatrix>> {
    let m_inv = inst.covariance(q)?.inverse_hpd()?;
    Ok(inst.h.iter().map(|hk| hermitian_part(&hk.adjoint().congruence(&m_inv))).collect())
}

fn hermitian_part(m: &CMatrix) -> CMatrix {
    let mut m = m.clone();
    m.symmetrize();
    m
}

/// Eigen-directions of `H^H R^{-1} H`, the effective channel of one user
/// against interference-plus-noise `R`.
fn effective_channel(h: &CMatrix, r: &CMatrix) -> Result<HermitianEig> {
    let g = h.adjoint().matmul(&r.solve_hpd(h)?);
    Ok(hermitian_eig(&hermitian(&g)?))
}

fn water_levels(eig: &HermitianEig, lambda: f64) -> impl Fn(f64) -> f64 + '_ {
    let floor = channel_floor(eig);
    move |sigma| if sigma > floor { (1.0 / lambda - 1.0 / sigma).max(0.0) } else { 0.0 }
}

/// Eigenvalues below this are treated as a null channel.
fn channel_floor(eig: &HermitianEig) -> f64 {
    1e-14 * eig.values.first().copied().unwrap_or(0.0).max(1.0)
}

fn power_at(eigs: &[HermitianEig], lambda: f64) -> f64 {
    eigs.iter().map(|e| e.values.iter().map(|s| water_levels(e, lambda)(*s)).sum::<f64>()).sum()
}

/// Maximizer of `log det(R + H Q H^H) - lambda tr(Q)` over PSD `Q`:
/// `Q = V diag([1/lambda - 1/sigma_i]^+) V^H` with `(sigma_i, V)` the
/// eigenpairs of `H^H R^{-1} H`.
pub fn waterfill_user(h: &CMatrix, r: &CMatrix, lambda: f64) -> Result<CMatrix> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("waterfilling needs lambda > 0, got {lambda}")));
    }
    if r.rows() != h.rows() || !r.is_square() {
        return Err(Error::DimensionMismatch { expected: h.rows(), got: r.rows() });
    }
    let eig = effective_channel(h, r)?;
    Ok(hermitian_part(&eig.reassemble(water_levels(&eig, lambda))))
}

#[derive(Debug, Clone)]
pub struct BcBestResponse {
    pub q: Vec<CMatrix>,
    /// Multiplier of the power constraint.
    pub lambda: f64,
}

/// Jointly waterfilled covariances against the frozen interference of `q`.
pub fn bc_best_response(q: &[CMatrix], inst: &MimoBcInstance) -> Result<BcBestResponse> {
    let m = inst.covariance(q)?;
    let eigs = inst
        .h
        .par_iter()
        .zip(q)
        .map(|(hk, qk)| {
            let mut r = m.sub(&hk.congruence(qk));
            r.symmetrize();
            effective_channel(hk, &r)
        })
        .collect::<Result<Vec<_>>>()?;
    let budget = inst.power;
    let lambda = if power_at(&eigs, LAMBDA_FLOOR) <= budget {
        LAMBDA_FLOOR
    } else {
        let mut hi = 1.0;
        let mut doublings = 0;
        while power_at(&eigs, hi) > budget {
            hi *= 2.0;
            doublings += 1;
            if doublings > 2000 || !hi.is_finite() {
                return Err(Error::BracketFailure("total power does not fall below the budget".into()));
            }
        }
        let iv = Interval::new(LAMBDA_FLOOR, hi)?;
        // power decreases in lambda, so bisect on budget - power
        let b = bisect_root_with(|l| budget - power_at(&eigs, l), iv, 0.0, POWER_TOL * budget, 400)
            .map_err(|e| Error::BracketFailure(e.to_string()))?;
        b.root
    };
    let q = eigs.iter().map(|e| hermitian_part(&e.reassemble(water_levels(e, lambda)))).collect();
    Ok(BcBestResponse { q, lambda })
}

/// Clips eigenvalues in `[-PSD_TOL, 0)` to zero.
pub fn repair_psd(q: &CMatrix) -> Result<CMatrix> {
    let h = hermitian(q)?;
    let eig = hermitian_eig(&h);
    let lowest = eig.values.last().copied().unwrap_or(0.0);
    if lowest >= 0.0 {
        return Ok(h.into_inner());
    }
    if lowest < -PSD_TOL * (1.0 + q.max_abs()) {
        return Err(Error::NumericalBreakdown(format!("covariance has eigenvalue {lowest:e}")));
    }
    Ok(hermitian_part(&eig.reassemble(|v| v.max(0.0))))
}

/// Engine view: minimize the negative sum rate.
impl SmoothProblem for MimoBcInstance {
    type Point = Vec<CMatrix>;

    fn value(&self, q: &Vec<CMatrix>) -> f64 {
        bc_objective(q, self).map(|v| -v).unwrap_or(f64::NAN)
    }

    fn gradient(&self, q: &Vec<CMatrix>) -> Vec<CMatrix> {
        match bc_gradient(q, self) {
            Ok(g) => g.iter().map(|gk| gk.scale(-1.0)).collect(),
            Err(_) => vec![CMatrix::from_real_diag(&vec![f64::NAN; self.n_t]); self.users()],
        }
    }

    fn initial_point(&self) -> Vec<CMatrix> {
        self.zero_point()
    }

    fn is_convex(&self) -> bool {
        true
    }

    fn repair(&self, q: Vec<CMatrix>) -> Result<Vec<CMatrix>> {
        q.iter().map(repair_psd).collect()
    }

    fn reported_value(&self, q: &Vec<CMatrix>) -> Option<f64> {
        bc_objective(q, self).ok()
    }
}

/// Joint waterfilling best response.
#[derive(Debug, Clone, Copy, Default)]
pub struct WaterfillRule;

impl ApproximationRule<MimoBcInstance> for WaterfillRule {
    fn name(&self) -> &str {
        "waterfill"
    }

    fn best_response(&self, p: &MimoBcInstance, q: &Vec<CMatrix>) -> Result<Vec<CMatrix>> {
        Ok(bc_best_response(q, p)?.q)
    }

    fn block_parallel(&self) -> bool {
        true
    }
}

/// Best response with a proximal term `tau/2 ||Q_k - Q_k^t||_F^2`. The
/// subproblem has no closed form and is solved by projected gradient.
#[derive(Debug, Clone, Copy)]
pub struct RegularizedWaterfillRule {
    pub tau: f64,
    pub inner_tol: f64,
    pub inner_max_iter: usize,
}

impl RegularizedWaterfillRule {
    pub fn new(tau: f64) -> Self {
        RegularizedWaterfillRule { tau, inner_tol: 1e-10, inner_max_iter: 2000 }
    }
}

impl ApproximationRule<MimoBcInstance> for RegularizedWaterfillRule {
    fn name(&self) -> &str {
        "regularized_waterfill"
    }

    fn best_response(&self, p: &MimoBcInstance, q: &Vec<CMatrix>) -> Result<Vec<CMatrix>> {
        regularized_best_response(q, p, self.tau, self.inner_tol, self.inner_max_iter)
    }

    fn block_parallel(&self) -> bool {
        true
    }
}

/// Projection onto `{Q_k PSD, sum_k tr(Q_k) <= P}`: eigenvalues of all
/// users are projected jointly onto the capped simplex.
pub fn project_covariances(q: &[CMatrix], power: f64) -> Result<Vec<CMatrix>> {
    let eigs = q.iter().map(|qk| Ok(hermitian_eig(&hermitian(qk)?))).collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = eigs.iter().flat_map(|e| e.values.iter().copied()).collect();
    let projected = FeasibleSet::PowerBudget { dim: values.len(), budget: power }.project(&values);
    let mut offset = 0;
    Ok(eigs
        .iter()
        .map(|e| {
            let n = e.values.len();
            let part = &projected[offset..offset + n];
            offset += n;
            let lookup = HermitianEig { values: part.to_vec(), vectors: e.vectors.clone() };
            hermitian_part(&lookup.reassemble(|v| v))
        })
        .collect())
}

fn regularized_best_response(
    qt: &[CMatrix],
    inst: &MimoBcInstance,
    tau: f64,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<CMatrix>> {
    let m = inst.covariance(qt)?;
    let interference: Vec<CMatrix> = inst
        .h
        .iter()
        .zip(qt)
        .map(|(hk, qk)| hermitian_part(&m.sub(&hk.congruence(qk))))
        .collect();
    let objective = |q: &[CMatrix]| -> Result<f64> {
        let mut total = 0.0;
        for (((hk, rk), qk), qtk) in inst.h.iter().zip(&interference).zip(q).zip(qt) {
            let diff = qk.sub(qtk);
            total += hermitian_part(&rk.add(&hk.congruence(qk))).logdet_hpd()? - 0.5 * tau * diff.inner(&diff);
        }
        Ok(total)
    };
    let gradient = |q: &[CMatrix]| -> Result<Vec<CMatrix>> {
        inst.h
            .iter()
            .zip(&interference)
            .zip(q)
            .zip(qt)
            .map(|(((hk, rk), qk), qtk)| {
                let inv = hermitian_part(&rk.add(&hk.congruence(qk))).inverse_hpd()?;
                Ok(hermitian_part(&hk.adjoint().congruence(&inv)).sub(&qk.sub(qtk).scale(tau)))
            })
            .collect()
    };
    let mut q = project_covariances(&bc_best_response(qt, inst)?.q, inst.power)?;
    let mut value = objective(&q)?;
    let mut step = 1.0;
    for _ in 0..max_iter {
        let g = gradient(&q)?;
        loop {
            let trial: Vec<CMatrix> = q.iter().zip(&g).map(|(a, b)| a.add(&b.scale(step))).collect();
            let next = project_covariances(&trial, inst.power)?;
            let d: Vec<CMatrix> = next.iter().zip(&q).map(|(a, b)| a.sub(b)).collect();
            let lin: f64 = g.iter().zip(&d).map(|(a, b)| a.inner(b)).sum();
            let sq: f64 = d.iter().map(|x| x.inner(x)).sum();
            let next_value = objective(&next)?;
            if next_value >= value + lin - sq / (2.0 * step) - 1e-15 * value.abs() {
                let moved = d.iter().fold(0.0_f64, |m, x| m.max(x.max_abs()));
                q = next;
                value = next_value;
                step *= 2.0;
                if moved <= tol {
                    return Ok(q);
                }
                break;
            }
            step *= 0.5;
            if step < 1e-20 {
                return Ok(q);
            }
        }
    }
    Ok(q)
}

/// Fixed stepsize `1/K`.
pub fn fixed_inverse_users(inst: &MimoBcInstance) -> StepsizeRule {
    StepsizeRule::Constant { gamma: 1.0 / inst.users() as f64 }
}

/// Waterfilling iteration from `Q = 0`; the trace's extra column is the sum
/// rate and the stationarity error is `Re tr(grad(Q) (BQ - Q))`.
pub fn bc_solve(inst: &MimoBcInstance, step: StepsizeRule, stop: StopCriteria) -> Result<Solution<Vec<CMatrix>>> {
    solve_smooth(inst, &WaterfillRule, step, stop)
}

/// Single-user capacity by classic waterfilling over the eigenmodes of
/// `H^H H`: `sum_i log(1 + sigma_i q_i)` with `sum q_i = P`.
pub fn single_user_capacity(h: &CMatrix, power: f64) -> Result<f64> {
    let eig = hermitian_eig(&hermitian(&h.adjoint().matmul(h))?);
    let floor = channel_floor(&eig);
    let sigma: Vec<f64> = eig.values.iter().copied().filter(|s| *s > floor).collect();
    // sigma is descending; find the largest active set with a positive level
    for active in (1..=sigma.len()).rev() {
        let level = (power + sigma[..active].iter().map(|s| 1.0 / s).sum::<f64>()) / active as f64;
        if level - 1.0 / sigma[active - 1] >= 0.0 {
            return Ok(sigma[..active].iter().map(|s| (s * level).ln()).sum());
        }
    }
    Ok(0.0)
}
