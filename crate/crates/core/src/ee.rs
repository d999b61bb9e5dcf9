//! Energy-efficiency maximization over a power box
//!
//! ```text
//! maximize sum_k r_k(p) / (P_c + sum_k p_k),   pmin <= p <= pmax
//! r_k(p) = log(1 + w_kk p_k / (sigma_k^2 + phi_k p_k + sum_{j != k} w_kj p_j))
//! ```
//!
//! The surrogate keeps `r_k` and the denominator exact in `p_k` and
//! linearizes the other users' rates, so each user's subproblem is a
//! concave-over-linear ratio. Dinkelbach's method reduces it to a sequence
//! of scalar concave problems whose stationarity condition is a quadratic.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::engine::{
    solve_smooth, ApproximationRule, FeasibleSet, Notice, SmoothProblem, Solution, StepsizeRule, StopCriteria,
    VectorProblem,
};
use crate::error::{Error, Result};
use crate::numerics::{bisect_root_with, Interval};
use crate::rng::SeededRng;

/// Largest accepted gap between the closed-form inner solution and its
/// bisection oracle.
pub const CLOSED_FORM_TOL: f64 = 1e-6;
pub const DEFAULT_DINKELBACH_TOL: f64 = 1e-5;
pub const DEFAULT_DINKELBACH_MAX_ITER: usize = 100;

pub fn dbm_to_linear(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EeInstance {
    /// `w[k][j]`: gain of user `j`'s signal at receiver `k`.
    pub w: Vec<Vec<f64>>,
    pub phi: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub pc: f64,
    pub pmin: Vec<f64>,
    pub pmax: Vec<f64>,
    #[serde(skip)]
    set: Option<FeasibleSet>,
}

impl EeInstance {
    pub fn new(
        w: Vec<Vec<f64>>,
        phi: Vec<f64>,
        sigma2: Vec<f64>,
        pc: f64,
        pmin: Vec<f64>,
        pmax: Vec<f64>,
    ) -> Result<Self> {
        let mut inst = EeInstance { w, phi, sigma2, pc, pmin, pmax, set: None };
        inst.validate()?;
        Ok(inst)
    }

    /// Checks shapes and positivity and caches the box.
    pub fn validate(&mut self) -> Result<()> {
        let k = self.w.len();
        if k == 0 {
            return Err(Error::InvalidInstance("no users".into()));
        }
        for (name, len) in [
            ("phi", self.phi.len()),
            ("sigma2", self.sigma2.len()),
            ("pmin", self.pmin.len()),
            ("pmax", self.pmax.len()),
        ] {
            if len != k {
                return Err(Error::InvalidInstance(format!("{name} has {len} entries, expected {k}")));
            }
        }
        if self.w.iter().any(|row| row.len() != k) {
            return Err(Error::InvalidInstance("gain matrix is not square".into()));
        }
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !self.w.iter().flatten().all(|v| positive(*v)) {
            return Err(Error::InvalidInstance("gains must be positive".into()));
        }
        // phi = 0 is accepted: it is the impairment-free limit
        if !self.phi.iter().all(|v| *v >= 0.0 && v.is_finite()) {
            return Err(Error::InvalidInstance("impairment coefficients must be nonnegative".into()));
        }
        if !self.sigma2.iter().all(|v| positive(*v)) || !positive(self.pc) {
            return Err(Error::InvalidInstance("noise and circuit power must be positive".into()));
        }
        for (lo, hi) in self.pmin.iter().zip(&self.pmax) {
            if !(positive(*lo) && lo <= hi && hi.is_finite()) {
                return Err(Error::InvalidInstance(format!("power bounds need 0 < pmin <= pmax, got [{lo}, {hi}]")));
            }
        }
        self.set = Some(FeasibleSet::bounded_box(self.pmin.clone(), self.pmax.clone())?);
        Ok(())
    }

    /// Gains from channels `h[k][j]` (user `j` to receiver `k`, `M`
    /// antennas each): `w_kk = ||h_kk||^4`,
    /// `w_kj = |h_kk^H h_kj|^2 + eps h_kk^H D_j h_kk` and
    /// `phi_k = eps h_kk^H D_k h_kk` with `D_j = diag(|h_jj|^2)`.
    pub fn from_channels(
        h: &[Vec<Vec<num_complex::Complex64>>],
        eps: f64,
        sigma2: f64,
        pc: f64,
        pmin: f64,
        pmax: f64,
    ) -> Result<Self> {
        let k = h.len();
        let weighted = |a: &[num_complex::Complex64], d: &[num_complex::Complex64]| -> f64 {
            a.iter().zip(d).map(|(x, y)| x.norm_sqr() * y.norm_sqr()).sum()
        };
        let mut w = vec![vec![0.0; k]; k];
        let mut phi = vec![0.0; k];
        for kk in 0..k {
            let hkk = &h[kk][kk];
            for j in 0..k {
                let inner: num_complex::Complex64 = hkk.iter().zip(&h[kk][j]).map(|(a, b)| a.conj() * b).sum();
                w[kk][j] = if j == kk {
                    inner.norm_sqr()
                } else {
                    inner.norm_sqr() + eps * weighted(hkk, &h[j][j])
                };
            }
            phi[kk] = eps * weighted(hkk, hkk);
        }
        Self::new(w, phi, vec![sigma2; k], pc, vec![pmin; k], vec![pmax; k])
    }

    /// I.i.d. unit-variance complex Gaussian channels with `M` antennas,
    /// unit noise, 10 dBm circuit power and a [-10, 10] dBm power box
    /// (0 dBm taken as one unit).
    pub fn random(users: usize, antennas: usize, eps: f64, seed: u64) -> Result<Self> {
        if users == 0 || antennas == 0 {
            return Err(Error::InvalidParameter("need at least one user and one antenna".into()));
        }
        let mut rng = SeededRng::new(seed);
        let h: Vec<Vec<Vec<_>>> = (0..users)
            .map(|_| (0..users).map(|_| (0..antennas).map(|_| rng.complex_gaussian()).collect()).collect())
            .collect();
        Self::from_channels(&h, eps, 1.0, dbm_to_linear(10.0), dbm_to_linear(-10.0), dbm_to_linear(10.0))
    }

    pub fn users(&self) -> usize {
        self.w.len()
    }

    fn check(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.users() {
            return Err(Error::DimensionMismatch { expected: self.users(), got: p.len() });
        }
        let slack = |v: f64| 1e-12 * (1.0 + v.abs());
        for (k, v) in p.iter().enumerate() {
            if !(*v >= self.pmin[k] - slack(self.pmin[k]) && *v <= self.pmax[k] + slack(self.pmax[k])) {
                return Err(Error::InvalidParameter(format!(
                    "power {v} of user {k} outside [{}, {}]",
                    self.pmin[k], self.pmax[k]
                )));
            }
        }
        Ok(())
    }

    /// `sigma_k^2 + sum_{j != k} w_kj p_j`.
    pub fn interference(&self, k: usize, p: &[f64]) -> f64 {
        self.sigma2[k] + (0..self.users()).filter(|j| *j != k).map(|j| self.w[k][j] * p[j]).sum::<f64>()
    }

    /// `r_k(p)` in nats.
    pub fn rate(&self, k: usize, p: &[f64]) -> f64 {
        user_rate(self.interference(k, p), self.w[k][k], self.phi[k], p[k])
    }

    pub fn rates(&self, p: &[f64]) -> Vec<f64> {
        (0..self.users()).map(|k| self.rate(k, p)).collect()
    }

    /// `grad[j][k] = d r_j / d p_k`.
    pub fn rate_jacobian(&self, p: &[f64]) -> Vec<Vec<f64>> {
        let n = self.users();
        (0..n)
            .map(|j| {
                let interference = self.sigma2[j] + self.phi[j] * p[j] + (0..n).filter(|l| *l != j).map(|l| self.w[j][l] * p[l]).sum::<f64>();
                let signal = interference + self.w[j][j] * p[j];
                (0..n)
                    .map(|k| {
                        if k == j {
                            (self.w[j][j] + self.phi[j]) / signal - self.phi[j] / interference
                        } else {
                            self.w[j][k] / signal - self.w[j][k] / interference
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// `pi_k = sum_{j != k} d r_j / d p_k`; nonpositive since other users'
    /// rates only lose from more interference.
    pub fn cross_gradient(&self, p: &[f64]) -> Vec<f64> {
        let jac = self.rate_jacobian(p);
        (0..self.users()).map(|k| (0..self.users()).filter(|j| *j != k).map(|j| jac[j][k]).sum()).collect()
    }

    /// `||p - clamp(p + grad EE(p))||_inf`, zero exactly at box-KKT points.
    pub fn kkt_residual(&self, p: &[f64]) -> Result<f64> {
        let g = ee_gradient(p, self)?;
        Ok((0..self.users())
            .map(|k| (p[k] - (p[k] + g[k]).clamp(self.pmin[k], self.pmax[k])).abs())
            .fold(0.0, f64::max))
    }

    fn set(&self) -> &FeasibleSet {
        self.set.as_ref().expect("instance validated")
    }
}

/// `log(int + (phi + w) p) - log(int + phi p)`.
fn user_rate(interference: f64, w: f64, phi: f64, p: f64) -> f64 {
    (w * p / (interference + phi * p)).ln_1p()
}

fn user_rate_derivative(interference: f64, w: f64, phi: f64, p: f64) -> f64 {
    (w + phi) / (interference + (w + phi) * p) - phi / (interference + phi * p)
}

pub fn ee_objective(p: &[f64], inst: &EeInstance) -> Result<f64> {
    inst.check(p)?;
    Ok(inst.rates(p).iter().sum::<f64>() / (inst.pc + p.iter().sum::<f64>()))
}

pub fn ee_gradient(p: &[f64], inst: &EeInstance) -> Result<Vec<f64>> {
    inst.check(p)?;
    Ok(gradient_unchecked(p, inst))
}

fn gradient_unchecked(p: &[f64], inst: &EeInstance) -> Vec<f64> {
    let denom = inst.pc + p.iter().sum::<f64>();
    let value = inst.rates(p).iter().sum::<f64>() / denom;
    let jac = inst.rate_jacobian(p);
    (0..inst.users()).map(|k| (jac.iter().map(|row| row[k]).sum::<f64>() - value) / denom).collect()
}

/// Per-user data of the surrogate built at `pt`.
#[derive(Debug, Clone, Copy)]
struct Component {
    interference: f64,
    w: f64,
    phi: f64,
    pi: f64,
    /// `sum_{j != k} r_j(pt) - pi pt_k`.
    offset: f64,
    /// `P_c + sum_{j != k} pt_j`.
    base_power: f64,
    lo: f64,
    hi: f64,
}

impl Component {
    fn numerator(&self, p: f64) -> f64 {
        user_rate(self.interference, self.w, self.phi, p) + self.offset + self.pi * p
    }

    fn ratio(&self, p: f64) -> f64 {
        self.numerator(p) / (self.base_power + p)
    }
}

fn components(pt: &[f64], inst: &EeInstance) -> Vec<Component> {
    let rates = inst.rates(pt);
    let total: f64 = rates.iter().sum();
    let power: f64 = pt.iter().sum();
    let pi = inst.cross_gradient(pt);
    (0..inst.users())
        .map(|k| Component {
            interference: inst.interference(k, pt),
            w: inst.w[k][k],
            phi: inst.phi[k],
            pi: pi[k],
            offset: total - rates[k] - pi[k] * pt[k],
            base_power: inst.pc + power - pt[k],
            lo: inst.pmin[k],
            hi: inst.pmax[k],
        })
        .collect()
}

/// Surrogate `sum_k r~_k(p_k; pt) / (P_c + p_k + sum_{j != k} pt_j)`.
pub fn ee_surrogate(p: &[f64], pt: &[f64], inst: &EeInstance) -> Result<f64> {
    inst.check(p)?;
    inst.check(pt)?;
    Ok(components(pt, inst).iter().zip(p).map(|(c, pk)| c.ratio(*pk)).sum())
}

/// Gradient of the surrogate in `p`.
pub fn ee_surrogate_gradient(p: &[f64], pt: &[f64], inst: &EeInstance) -> Result<Vec<f64>> {
    inst.check(p)?;
    inst.check(pt)?;
    Ok(components(pt, inst)
        .iter()
        .zip(p)
        .map(|(c, pk)| {
            let den = c.base_power + pk;
            let dnum = user_rate_derivative(c.interference, c.w, c.phi, *pk) + c.pi;
            (dnum * den - c.numerator(*pk)) / (den * den)
        })
        .collect())
}

/// Maximizer over `[lo, hi]` of `r(p) + u p` with `r` the user rate against
/// interference `int` and `u = pi - lambda`.
///
/// Stationarity `(w + phi)/(int + (w + phi) p) - phi/(int + phi p) = -u`
/// is the quadratic `a c p^2 + int (a + c) p + int^2 (1 + w / (u int)) = 0`
/// with `a = w + phi`, `c = phi`. Its relevant root is taken in the
/// rationalized form, which stays accurate as `phi -> 0`.
pub fn inner_closed_form(interference: f64, w: f64, phi: f64, u: f64, lo: f64, hi: f64) -> f64 {
    if u >= 0.0 {
        // rate increasing and no price: use all the power
        return hi;
    }
    let a = w + phi;
    let b = a + phi;
    let d = 1.0 + w / (u * interference);
    let root = -2.0 * interference * d / ((b * b - 4.0 * a * phi * d).sqrt() + b);
    root.clamp(lo, hi)
}

/// Same maximizer by bisection on the decreasing derivative.
pub fn inner_oracle(interference: f64, w: f64, phi: f64, u: f64, lo: f64, hi: f64) -> Result<f64> {
    let deriv = |p: f64| user_rate_derivative(interference, w, phi, p) + u;
    if deriv(lo) <= 0.0 {
        return Ok(lo);
    }
    if deriv(hi) >= 0.0 {
        return Ok(hi);
    }
    let iv = Interval::new(lo, hi)?;
    Ok(bisect_root_with(|p| -deriv(p), iv, 1e-14 * (1.0 + hi), 0.0, 200)?.root)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DinkelbachOptions {
    /// Stop when `|lambda^{tau+1} - lambda^tau| <= tol`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for DinkelbachOptions {
    fn default() -> Self {
        DinkelbachOptions { tol: DEFAULT_DINKELBACH_TOL, max_iter: DEFAULT_DINKELBACH_MAX_ITER }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DinkelbachOutcome {
    pub p: f64,
    /// Final level, the surrogate ratio at `p`.
    pub lambda: f64,
    pub levels: Vec<f64>,
    /// Largest closed-form/oracle gap when the fallback engaged.
    pub fallback: Option<f64>,
}

/// Maximizes user `k`'s surrogate ratio over its power interval.
pub fn dinkelbach_user(k: usize, pt: &[f64], inst: &EeInstance, opts: &DinkelbachOptions) -> Result<DinkelbachOutcome> {
    inst.check(pt)?;
    if k >= inst.users() {
        return Err(Error::DimensionMismatch { expected: inst.users(), got: k });
    }
    dinkelbach(&components(pt, inst)[k], opts)
}

fn dinkelbach(c: &Component, opts: &DinkelbachOptions) -> Result<DinkelbachOutcome> {
    let mut fallback: Option<f64> = None;
    let mut argmax = |lambda: f64| -> Result<f64> {
        let u = c.pi - lambda;
        let closed = inner_closed_form(c.interference, c.w, c.phi, u, c.lo, c.hi);
        let oracle = inner_oracle(c.interference, c.w, c.phi, u, c.lo, c.hi)?;
        let gap = (closed - oracle).abs();
        if gap.is_nan() || gap > CLOSED_FORM_TOL {
            fallback = Some(fallback.map_or(gap, |g: f64| g.max(gap)));
            Ok(oracle)
        } else {
            Ok(closed)
        }
    };
    let mut lambda = 0.0;
    let mut levels = vec![lambda];
    let mut p = argmax(lambda)?;
    for _ in 0..opts.max_iter {
        let next = c.ratio(p);
        levels.push(next);
        let change = (next - lambda).abs();
        lambda = next;
        p = argmax(lambda)?;
        if change <= opts.tol {
            break;
        }
    }
    let lambda = c.ratio(p);
    Ok(DinkelbachOutcome { p, lambda, levels, fallback })
}

/// Best response of all users; reports users whose closed form was
/// replaced by the oracle.
pub fn ee_best_response(pt: &[f64], inst: &EeInstance, opts: &DinkelbachOptions) -> Result<(Vec<f64>, Vec<(usize, f64)>)> {
    inst.check(pt)?;
    let mut bp = Vec::with_capacity(inst.users());
    let mut fallbacks = Vec::new();
    for (k, c) in components(pt, inst).iter().enumerate() {
        let out = dinkelbach(c, opts)?;
        if let Some(gap) = out.fallback {
            fallbacks.push((k, gap));
        }
        bp.push(out.p);
    }
    Ok((bp, fallbacks))
}

/// Engine view: minimize `-EE` over the power box.
impl SmoothProblem for EeInstance {
    type Point = Vec<f64>;

    fn value(&self, p: &Vec<f64>) -> f64 {
        ee_objective(p, self).map(|v| -v).unwrap_or(f64::NAN)
    }

    fn gradient(&self, p: &Vec<f64>) -> Vec<f64> {
        gradient_unchecked(p, self).iter().map(|g| -g).collect()
    }

    fn initial_point(&self) -> Vec<f64> {
        self.pmin.clone()
    }

    fn stationarity(&self, p: &Vec<f64>, _bp: &Vec<f64>) -> Option<f64> {
        self.kkt_residual(p).ok()
    }

    fn repair(&self, p: Vec<f64>) -> Result<Vec<f64>> {
        Ok(p.iter().enumerate().map(|(k, v)| v.clamp(self.pmin[k], self.pmax[k])).collect())
    }

    fn reported_value(&self, p: &Vec<f64>) -> Option<f64> {
        ee_objective(p, self).ok()
    }
}

impl VectorProblem for EeInstance {
    fn feasible_set(&self) -> &FeasibleSet {
        self.set()
    }

    fn partial(&self, k: usize, p: &[f64]) -> f64 {
        -gradient_unchecked(p, self)[k]
    }
}

/// Per-user Dinkelbach best response. Oracle fallbacks are recorded and
/// moved into the trace by [`ee_solve`].
#[derive(Debug, Default)]
pub struct DinkelbachRule {
    pub opts: DinkelbachOptions,
    calls: AtomicUsize,
    fallbacks: Mutex<Vec<Notice>>,
}

impl DinkelbachRule {
    pub fn new(opts: DinkelbachOptions) -> Self {
        DinkelbachRule { opts, calls: AtomicUsize::new(0), fallbacks: Mutex::new(Vec::new()) }
    }

    pub fn take_notices(&self) -> Vec<Notice> {
        std::mem::take(&mut *self.fallbacks.lock().unwrap_or_else(|e| e.into_inner()))
    }
}

impl ApproximationRule<EeInstance> for DinkelbachRule {
    fn name(&self) -> &str {
        "dinkelbach"
    }

    fn best_response(&self, p: &EeInstance, x: &Vec<f64>) -> Result<Vec<f64>> {
        let iter = self.calls.fetch_add(1, Ordering::Relaxed);
        let (bp, fallbacks) = ee_best_response(x, p, &self.opts)?;
        if !fallbacks.is_empty() {
            let mut log = self.fallbacks.lock().unwrap_or_else(|e| e.into_inner());
            log.extend(fallbacks.into_iter().map(|(block, deviation)| Notice::ClosedFormFallback { iter, block, deviation }));
        }
        Ok(bp)
    }

    fn block_parallel(&self) -> bool {
        true
    }

    fn surrogate(&self, p: &EeInstance, x: &Vec<f64>, xt: &Vec<f64>) -> Option<f64> {
        ee_surrogate(x, xt, p).ok().map(|v| -v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EeOptions {
    pub step: StepsizeRule,
    pub stop: StopCriteria,
    pub dinkelbach: DinkelbachOptions,
}

impl Default for EeOptions {
    fn default() -> Self {
        EeOptions { step: StepsizeRule::armijo(), stop: StopCriteria::new(1e-5, 200), dinkelbach: DinkelbachOptions::default() }
    }
}

/// Successive pseudo-concave approximation from `p = pmin`; traces report
/// the positive EE value in the extra column.
pub fn ee_solve(inst: &EeInstance, opts: &EeOptions) -> Result<Solution<Vec<f64>>> {
    let rule = DinkelbachRule::new(opts.dinkelbach);
    let mut sol = solve_smooth(inst, &rule, opts.step, opts.stop)?;
    for n in rule.take_notices() {
        sol.trace.push_notice(n);
    }
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Termination;
    use crate::numerics::check_gradient;

    fn single(w: f64, phi: f64, pc: f64, lo: f64, hi: f64) -> EeInstance {
        EeInstance::new(vec![vec![w]], vec![phi], vec![1.0], pc, vec![lo], vec![hi]).unwrap()
    }

    fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
        let r = (5f64.sqrt() - 1.0) / 2.0;
        while b - a > 1e-12 * (1.0 + b.abs()) {
            let c = b - r * (b - a);
            let d = a + r * (b - a);
            if f(c) >= f(d) {
                b = d;
            } else {
                a = c;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn single_user_objective() {
        let inst = single(1.0, 0.0, 3.0, 0.1, 10.0);
        let v = ee_objective(&[2.0], &inst).unwrap();
        assert!((v - 3f64.ln() / 5.0).abs() < 1e-15);
        assert!(ee_objective(&[20.0], &inst).is_err());
    }

    #[test]
    fn lower_bound_value_is_positive() {
        let inst = EeInstance::random(4, 8, 0.01, 3).unwrap();
        let v = ee_objective(&inst.pmin.clone(), &inst).unwrap();
        assert!(v.is_finite() && v > 0.0);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let inst = EeInstance::random(4, 8, 0.01, 5).unwrap();
        let mut rng = SeededRng::new(1);
        for _ in 0..10 {
            let p: Vec<f64> = (0..4).map(|_| rng.uniform_range(0.2, 9.0)).collect();
            let err = check_gradient(|x| ee_objective(x, &inst).unwrap(), |x| ee_gradient(x, &inst).unwrap(), &p, 1e-6);
            assert!(err <= 1e-5, "{err}");
            let err = check_gradient(
                |x| ee_surrogate(x, &p, &inst).unwrap(),
                |x| ee_surrogate_gradient(x, &p, &inst).unwrap(),
                &p,
                1e-6,
            );
            assert!(err <= 1e-5, "{err}");
        }
    }

    #[test]
    fn surrogate_gradient_matches_objective_at_anchor() {
        let inst = EeInstance::random(3, 4, 0.01, 7).unwrap();
        let mut rng = SeededRng::new(2);
        for _ in 0..20 {
            let p: Vec<f64> = (0..3).map(|_| rng.uniform_range(0.1, 10.0)).collect();
            let a = ee_surrogate_gradient(&p, &p, &inst).unwrap();
            let b = ee_gradient(&p, &inst).unwrap();
            let gap = a.iter().zip(&b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
            assert!(gap <= 1e-12, "{gap}");
        }
    }

    #[test]
    fn single_user_surrogate_is_exact() {
        let inst = single(2.0, 0.05, 10.0, 0.1, 10.0);
        for (p, pt) in [(0.5, 3.0), (7.0, 0.2)] {
            let a = ee_surrogate(&[p], &[pt], &inst).unwrap();
            assert!((a - ee_objective(&[p], &inst).unwrap()).abs() < 1e-15);
        }
    }

    #[test]
    fn cross_gradient_is_nonpositive() {
        let inst = EeInstance::random(5, 4, 0.01, 11).unwrap();
        let mut rng = SeededRng::new(4);
        let p: Vec<f64> = (0..5).map(|_| rng.uniform_range(0.1, 10.0)).collect();
        assert!(inst.cross_gradient(&p).iter().all(|v| *v <= 0.0));
    }

    #[test]
    fn numerator_concave_on_grid() {
        let inst = EeInstance::random(3, 4, 0.01, 13).unwrap();
        let pt = vec![1.0, 2.0, 3.0];
        for c in components(&pt, &inst) {
            let h = (c.hi - c.lo) / 1000.0;
            for i in 1..1000 {
                let p = c.lo + h * i as f64;
                let second = c.numerator(p + h) - 2.0 * c.numerator(p) + c.numerator(p - h);
                assert!(second <= 1e-14, "{second}");
            }
        }
    }

    #[test]
    fn impairment_free_root() {
        // phi = 0: p = -1/u - int/w
        let p = inner_closed_form(2.0, 4.0, 0.0, -0.2, 0.0, 100.0);
        assert!((p - (5.0 - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn closed_form_matches_oracle() {
        let mut rng = SeededRng::new(21);
        for _ in 0..1000 {
            let int = rng.uniform_range(0.5, 50.0);
            let w = rng.uniform_range(0.1, 100.0);
            let phi = rng.uniform_range(0.0, 1.0);
            let u = -rng.uniform_range(1e-3, 2.0);
            let closed = inner_closed_form(int, w, phi, u, 0.1, 10.0);
            let oracle = inner_oracle(int, w, phi, u, 0.1, 10.0).unwrap();
            assert!((closed - oracle).abs() <= CLOSED_FORM_TOL, "{closed} vs {oracle}");
        }
    }

    #[test]
    fn dinkelbach_single_user_matches_golden_section() {
        let inst = single(1.0, 1e-9, 10.0, 0.1, 10.0);
        let out = dinkelbach_user(0, &[1.0], &inst, &DinkelbachOptions::default()).unwrap();
        let f = |p: f64| (1.0 + p / (1.0 + 1e-9 * p)).ln() / (10.0 + p);
        let best = golden_max(f, 0.1, 10.0);
        assert!((out.p - best).abs() < 1e-6, "{} vs {best}", out.p);
        assert!((out.lambda - f(out.p)).abs() < 1e-15);
        assert!(out.levels.windows(2).all(|w| w[1] >= w[0]));
        assert!(out.fallback.is_none());
    }

    #[test]
    fn monotone_ratio_returns_bound() {
        // tiny circuit power makes the ratio decreasing on the box
        let inst = single(1.0, 0.01, 1e-3, 1.0, 10.0);
        let out = dinkelbach_user(0, &[5.0], &inst, &DinkelbachOptions::default()).unwrap();
        assert_eq!(out.p, 1.0);
        let inst = single(1e-3, 0.0, 1e3, 0.1, 2.0);
        let out = dinkelbach_user(0, &[1.0], &inst, &DinkelbachOptions::default()).unwrap();
        assert_eq!(out.p, 2.0);
    }

    #[test]
    fn unit_channels() {
        let one = num_complex::Complex64::new(1.0, 0.0);
        let h = vec![vec![vec![one]; 2]; 2];
        let inst = EeInstance::from_channels(&h, 0.01, 1.0, 10.0, 0.1, 10.0).unwrap();
        assert_eq!(inst.w[0][0], 1.0);
        assert_eq!(inst.phi, vec![0.01, 0.01]);
        assert!((dbm_to_linear(10.0) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn deterministic_instances() {
        assert_eq!(EeInstance::random(4, 8, 0.01, 9).unwrap(), EeInstance::random(4, 8, 0.01, 9).unwrap());
    }

    #[test]
    fn symmetric_users_stay_symmetric() {
        let inst = EeInstance::new(
            vec![vec![2.0, 0.3], vec![0.3, 2.0]],
            vec![0.02, 0.02],
            vec![1.0, 1.0],
            10.0,
            vec![0.1, 0.1],
            vec![10.0, 10.0],
        )
        .unwrap();
        let sol = ee_solve(&inst, &EeOptions::default()).unwrap();
        for r in &sol.trace.records {
            assert!(r.extra.is_some());
        }
        assert_eq!(sol.x[0], sol.x[1]);
    }

    #[test]
    fn solve_is_monotone_and_stationary() {
        let inst = EeInstance::random(4, 8, 0.01, 1).unwrap();
        let sol = ee_solve(&inst, &EeOptions::default()).unwrap();
        assert_eq!(sol.trace.termination, Termination::Converged);
        let ee: Vec<f64> = sol.trace.records.iter().map(|r| r.extra.unwrap()).collect();
        assert!(ee.windows(2).all(|w| w[1] >= w[0]));
        assert!(inst.kkt_residual(&sol.x).unwrap() <= 1e-5);
    }
}
