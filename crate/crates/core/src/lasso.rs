//! l1-regularized least squares `1/2 ||Ax - b||^2 + mu ||x||_1`.
//!
//! STELA: every coordinate is updated by soft-thresholding against the
//! frozen residual, and the stepsize is the closed-form minimizer of
//! `f(x + gamma d) + gamma (g(Bx) - g(x))` over `[0, 1]`. The residual
//! `s = Ax - b` is carried by the recursion `s += gamma A (Bx - x)` so each
//! iteration costs one product with `A` and one with `A^T`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{
    ApproximationRule, DIVERGENCE_GUARD, CompositeProblem, FeasibleSet, IterRecord, IterateTrace, Notice, ProxProblem, SmoothProblem,
    Solution, Termination, VectorProblem,
};
use crate::error::{Error, Result};
use crate::numerics::{dot, norm1, norm2, norm_inf, shrink, Matrix};
use crate::rng::SeededRng;

/// Iterations between full recomputations of the residual.
pub const RESYNC_INTERVAL: usize = 500;
pub const DEFAULT_STELA_TOL: f64 = 1e-6;
pub const DEFAULT_STELA_MAX_ITER: usize = 2000;

#[derive(Debug, Clone)]
pub struct LassoInstance {
    a: Matrix,
    b: Vec<f64>,
    mu: f64,
    d: Vec<f64>,
    set: FeasibleSet,
}

impl LassoInstance {
    pub fn new(a: Matrix, b: Vec<f64>, mu: f64) -> Result<Self> {
        if b.len() != a.rows() {
            return Err(Error::DimensionMismatch { expected: a.rows(), got: b.len() });
        }
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(Error::InvalidInstance(format!("mu must be positive and finite, got {mu}")));
        }
        if a.as_slice().iter().chain(&b).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInstance("non-finite entry in A or b".into()));
        }
        let d = diag_ata(&a)?;
        let set = FeasibleSet::Unconstrained { dim: a.cols() };
        Ok(LassoInstance { a, b, mu, d, set })
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Number of measurements (rows of `A`).
    pub fn n(&self) -> usize {
        self.a.rows()
    }

    /// Number of unknowns (columns of `A`).
    pub fn k(&self) -> usize {
        self.a.cols()
    }

    /// `diag(A^T A)`.
    pub fn diag(&self) -> &[f64] {
        &self.d
    }

    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        let mut s = self.a.mul_vec(x);
        s.iter_mut().zip(&self.b).for_each(|(si, bi)| *si -= bi);
        s
    }

    /// `1/2 ||Ax - b||^2 + mu ||x||_1`.
    pub fn objective(&self, x: &[f64]) -> f64 {
        let s = self.residual(x);
        0.5 * dot(&s, &s) + self.mu * norm1(x)
    }
}

/// Squared column norms, rejecting zero columns.
fn diag_ata(a: &Matrix) -> Result<Vec<f64>> {
    let d = a.column_sq_norms();
    if let Some(column) = d.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::DegenerateColumn { column });
    }
    Ok(d)
}

/// `e(x) = || grad f - clamp(grad f - x, -mu, mu) ||_2`; zero exactly at
/// solutions.
pub fn lasso_error(x: &[f64], inst: &LassoInstance) -> f64 {
    let g = inst.a.tr_mul_vec(&inst.residual(x));
    error_from_gradient(&g, x, inst.mu)
}

fn error_from_gradient(g: &[f64], x: &[f64], mu: f64) -> f64 {
    g.iter()
        .zip(x)
        .map(|(gi, xi)| {
            let r = gi - (gi - xi).clamp(-mu, mu);
            r * r
        })
        .sum::<f64>()
        .sqrt()
}

/// `Bx = d^{-1} S_mu(d x - g)`: each coordinate minimizes
/// `f(u, x_{-k}) + mu |u|` with the others frozen.
fn best_response_from_gradient(g: &[f64], x: &[f64], d: &[f64], mu: f64) -> Vec<f64> {
    g.iter()
        .zip(x)
        .zip(d)
        .map(|((gi, xi), di)| shrink(di * xi - gi, mu) / di)
        .collect()
}

/// `||y||_1 - ||x||_1` summed termwise; near convergence the two norms
/// agree to many digits and subtracting the totals loses the sign.
fn l1_gap(y: &[f64], x: &[f64]) -> f64 {
    y.iter().zip(x).map(|(a, b)| a.abs() - b.abs()).sum()
}

/// Closed-form minimizer over `[0, 1]` of
/// `1/2 ||s + gamma A d||^2 + gamma mu (||Bx||_1 - ||x||_1)`.
fn closed_form_step(numerator: f64, denominator: f64) -> f64 {
    if denominator > 0.0 {
        (-numerator / denominator).clamp(0.0, 1.0)
    } else if numerator < 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Iterate, residual and cached column norms of a STELA run.
#[derive(Debug, Clone)]
pub struct StelaState {
    pub x: Vec<f64>,
    /// `A x - b`, maintained by recursion.
    pub s: Vec<f64>,
    pub d: Vec<f64>,
}

impl StelaState {
    /// `x = 0`, `s = -b`.
    pub fn new(inst: &LassoInstance) -> Self {
        StelaState {
            x: vec![0.0; inst.k()],
            s: inst.b.iter().map(|v| -v).collect(),
            d: inst.d.clone(),
        }
    }

    pub fn from_point(inst: &LassoInstance, x: Vec<f64>) -> Result<Self> {
        crate::numerics::check_len(inst.k(), x.len())?;
        let s = inst.residual(&x);
        Ok(StelaState { x, s, d: inst.d.clone() })
    }

    /// `||s - (Ax - b)||_2`.
    pub fn drift(&self, inst: &LassoInstance) -> f64 {
        let exact = inst.residual(&self.x);
        norm2(&self.s.iter().zip(&exact).map(|(a, b)| a - b).collect::<Vec<_>>())
    }

    pub fn resync(&mut self, inst: &LassoInstance) {
        self.s = inst.residual(&self.x);
    }
}

/// Soft-thresholding best response at the state's iterate.
pub fn stela_best_response(st: &StelaState, inst: &LassoInstance) -> Result<Vec<f64>> {
    if let Some(column) = st.d.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::DegenerateColumn { column });
    }
    let g = inst.a.tr_mul_vec(&st.s);
    Ok(best_response_from_gradient(&g, &st.x, &st.d, inst.mu))
}

/// Exact stepsize along `Bx - x`.
pub fn stela_stepsize(st: &StelaState, bx: &[f64], inst: &LassoInstance) -> f64 {
    let delta: Vec<f64> = bx.iter().zip(&st.x).map(|(a, b)| a - b).collect();
    let ad = inst.a.mul_vec(&delta);
    let numerator = dot(&st.s, &ad) + inst.mu * l1_gap(bx, &st.x);
    closed_form_step(numerator, dot(&ad, &ad))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StelaOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Worker threads for the matrix products; 1 runs inline.
    pub workers: usize,
}

impl Default for StelaOptions {
    fn default() -> Self {
        StelaOptions { tol: DEFAULT_STELA_TOL, max_iter: DEFAULT_STELA_MAX_ITER, workers: 1 }
    }
}

/// Matrix products split over column (for `A^T y`) or row (for `A x`)
/// ranges. Every output entry is accumulated in the same order as the
/// serial product, so results do not depend on the worker count.
struct Products<'a> {
    a: &'a Matrix,
    pool: Option<rayon::ThreadPool>,
    workers: usize,
}

impl<'a> Products<'a> {
    fn new(a: &'a Matrix, workers: usize) -> Result<Self> {
        let workers = workers.max(1);
        let pool = if workers > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(workers)
                    .build()
                    .map_err(|e| Error::InvalidParameter(format!("cannot start worker pool: {e}")))?,
            )
        } else {
            None
        };
        Ok(Products { a, pool, workers })
    }

    fn tr_mul(&self, y: &[f64]) -> Vec<f64> {
        match &self.pool {
            None => self.a.tr_mul_vec(y),
            Some(pool) => {
                let mut out = vec![0.0; self.a.cols()];
                let chunk = self.a.cols().div_ceil(self.workers).max(1);
                pool.install(|| {
                    out.par_chunks_mut(chunk)
                        .enumerate()
                        .for_each(|(i, o)| self.a.tr_mul_vec_cols(y, i * chunk, o));
                });
                out
            }
        }
    }

    fn mul(&self, x: &[f64]) -> Vec<f64> {
        match &self.pool {
            None => self.a.mul_vec(x),
            Some(pool) => {
                let mut out = vec![0.0; self.a.rows()];
                let chunk = self.a.rows().div_ceil(self.workers).max(1);
                pool.install(|| {
                    out.par_chunks_mut(chunk)
                        .enumerate()
                        .for_each(|(i, o)| self.a.mul_vec_rows(x, i * chunk, o));
                });
                out
            }
        }
    }
}

/// Quantities handed to a stepsize policy.
struct StepContext {
    numerator: f64,
    denominator: f64,
    error: f64,
}

/// Stepsize and proximal weight of a soft-thresholding iteration.
trait Policy {
    /// Weight `tau` of the proximal term `tau/2 (x_k - x_k^t)^2` added to
    /// each scalar subproblem; called once per iteration with the current
    /// objective.
    fn tau(&mut self, _objective: f64) -> f64 {
        0.0
    }

    fn step(&mut self, ctx: &StepContext) -> f64;
}

struct ExactStep;

impl Policy for ExactStep {
    fn step(&mut self, ctx: &StepContext) -> f64 {
        closed_form_step(ctx.numerator, ctx.denominator)
    }
}

fn iterate<P: Policy>(inst: &LassoInstance, mut st: StelaState, opts: &StelaOptions, policy: &mut P) -> Result<Solution<Vec<f64>>> {
    let products = Products::new(&inst.a, opts.workers)?;
    let tolerance = 1e-9 * (1.0 + norm2(&inst.b));
    let started = std::time::Instant::now();
    let mut trace = IterateTrace::new();
    let mu = inst.mu;
    let mut weights = st.d.clone();
    for t in 0.. {
        if t > 0 && t % RESYNC_INTERVAL == 0 {
            let drift = st.drift(inst);
            if drift > tolerance {
                trace.push_notice(Notice::ResidualResync { iter: t, drift });
            }
            st.resync(inst);
        }
        let g = products.tr_mul(&st.s);
        let error = error_from_gradient(&g, &st.x, mu);
        let objective = 0.5 * dot(&st.s, &st.s) + mu * norm1(&st.x);
        if !objective.is_finite() || !error.is_finite() {
            return Err(Error::NumericalBreakdown(format!("non-finite objective at iteration {t}")));
        }
        let mut record = IterRecord {
            iter: t,
            objective,
            gamma: None,
            error,
            seconds: started.elapsed().as_secs_f64(),
            extra: None,
        };
        let terminal = if error <= opts.tol {
            Some(Termination::Converged)
        } else if t >= opts.max_iter {
            Some(Termination::MaxIterations)
        } else if norm_inf(&st.x) > DIVERGENCE_GUARD {
            Some(Termination::Diverged)
        } else {
            None
        };
        if let Some(termination) = terminal {
            trace.records.push(record);
            trace.termination = termination;
            break;
        }
        let tau = policy.tau(objective);
        weights.iter_mut().zip(&st.d).for_each(|(w, d)| *w = d + tau);
        let bx = best_response_from_gradient(&g, &st.x, &weights, mu);
        let delta: Vec<f64> = bx.iter().zip(&st.x).map(|(a, b)| a - b).collect();
        if delta.iter().all(|v| *v == 0.0) {
            trace.records.push(record);
            trace.termination = Termination::Stalled;
            break;
        }
        let ad = products.mul(&delta);
        let ctx = StepContext {
            numerator: dot(&st.s, &ad) + mu * l1_gap(&bx, &st.x),
            denominator: dot(&ad, &ad),
            error,
        };
        let gamma = policy.step(&ctx);
        if gamma == 0.0 {
            trace.records.push(record);
            trace.termination = Termination::Stalled;
            break;
        }
        record.gamma = Some(gamma);
        trace.records.push(record);
        st.x.iter_mut().zip(&delta).for_each(|(x, dx)| *x += gamma * dx);
        st.s.iter_mut().zip(&ad).for_each(|(s, v)| *s += gamma * v);
    }
    Ok(Solution { x: st.x, trace })
}

/// STELA from `x = 0`.
pub fn stela_solve(inst: &LassoInstance, opts: &StelaOptions) -> Result<Solution<Vec<f64>>> {
    iterate(inst, StelaState::new(inst), opts, &mut ExactStep)
}

/// STELA from a given point.
pub fn stela_solve_from(inst: &LassoInstance, x0: Vec<f64>, opts: &StelaOptions) -> Result<Solution<Vec<f64>>> {
    iterate(inst, StelaState::from_point(inst, x0)?, opts, &mut ExactStep)
}

/// Decreasing-stepsize baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlexaOptions {
    pub gamma0: f64,
    /// Decreasing rate `d`.
    pub rate: f64,
    /// Initial proximal weight; `None` uses `tr(A^T A) / (2K)`.
    pub tau0: Option<f64>,
    /// Double `tau` when the objective increases and halve it after ten
    /// consecutive decreases.
    pub adapt_tau: bool,
}

impl FlexaOptions {
    pub fn with_rate(rate: f64) -> Self {
        FlexaOptions { gamma0: 0.9, rate, tau0: None, adapt_tau: true }
    }
}

struct DecreasingStep {
    gamma: f64,
    rate: f64,
    tau: f64,
    adapt: bool,
    previous: f64,
    decreases: usize,
}

impl Policy for DecreasingStep {
    fn tau(&mut self, objective: f64) -> f64 {
        if self.adapt {
            if objective > self.previous {
                self.tau *= 2.0;
                self.decreases = 0;
            } else {
                self.decreases += 1;
                if self.decreases >= 10 {
                    self.tau *= 0.5;
                    self.decreases = 0;
                }
            }
        }
        self.previous = objective;
        self.tau
    }

    fn step(&mut self, ctx: &StepContext) -> f64 {
        let current = self.gamma;
        self.gamma = current * (1.0 - (1e-4 / ctx.error).min(1.0) * self.rate * current);
        current
    }
}

/// Proximal soft-thresholding best response with the decreasing stepsize
/// `gamma^{t+1} = gamma^t (1 - min(1, 1e-4 / e(x^t)) d gamma^t)`.
pub fn flexa_baseline(inst: &LassoInstance, flexa: &FlexaOptions, opts: &StelaOptions) -> Result<Solution<Vec<f64>>> {
    let FlexaOptions { gamma0, rate, tau0, adapt_tau } = *flexa;
    if !(gamma0 > 0.0 && gamma0 <= 1.0) || !(0.0..=1.0).contains(&rate) {
        return Err(Error::InvalidParameter(format!("need gamma0 in (0,1] and rate in [0,1]: {gamma0}, {rate}")));
    }
    let tau = tau0.unwrap_or_else(|| inst.d.iter().sum::<f64>() / (2.0 * inst.k() as f64));
    if !(tau >= 0.0) || (adapt_tau && tau == 0.0) {
        return Err(Error::InvalidParameter(format!("invalid proximal weight {tau}")));
    }
    let mut policy = DecreasingStep { gamma: gamma0, rate, tau, adapt: adapt_tau, previous: f64::INFINITY, decreases: 0 };
    iterate(inst, StelaState::new(inst), opts, &mut policy)
}

/// Engine view: `f = 1/2 ||Ax - b||^2`, `g = mu ||x||_1`.
impl SmoothProblem for LassoInstance {
    type Point = Vec<f64>;

    fn value(&self, x: &Vec<f64>) -> f64 {
        let s = self.residual(x);
        0.5 * dot(&s, &s)
    }

    fn gradient(&self, x: &Vec<f64>) -> Vec<f64> {
        self.a.tr_mul_vec(&self.residual(x))
    }

    fn initial_point(&self) -> Vec<f64> {
        vec![0.0; self.k()]
    }

    fn is_convex(&self) -> bool {
        true
    }

    fn stationarity(&self, x: &Vec<f64>, _bx: &Vec<f64>) -> Option<f64> {
        Some(lasso_error(x, self))
    }

    fn line_minimizer(&self, x: &Vec<f64>, d: &Vec<f64>, g_gap: f64) -> Option<f64> {
        let ad = self.a.mul_vec(d);
        Some(closed_form_step(dot(&self.residual(x), &ad) + g_gap, dot(&ad, &ad)))
    }
}

impl CompositeProblem for LassoInstance {
    fn nonsmooth(&self, x: &Vec<f64>) -> f64 {
        self.mu * norm1(x)
    }
}

impl VectorProblem for LassoInstance {
    fn feasible_set(&self) -> &FeasibleSet {
        &self.set
    }

    fn partial(&self, k: usize, x: &[f64]) -> f64 {
        let s = self.residual(x);
        (0..self.n()).map(|i| self.a.get(i, k) * s[i]).sum()
    }
}

impl ProxProblem for LassoInstance {
    fn prox(&self, v: &[f64], s: f64) -> Vec<f64> {
        v.iter().map(|vi| shrink(*vi, s * self.mu)).collect()
    }
}

/// The STELA best response as an engine rule.
#[derive(Debug, Clone, Copy, Default)]
pub struct SoftThresholdRule;

impl ApproximationRule<LassoInstance> for SoftThresholdRule {
    fn name(&self) -> &str {
        "soft_threshold"
    }

    fn best_response(&self, p: &LassoInstance, x: &Vec<f64>) -> Result<Vec<f64>> {
        let g = p.gradient(x);
        Ok(best_response_from_gradient(&g, x, &p.d, p.mu))
    }

    fn block_parallel(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BpOptions {
    pub max_outer: usize,
    /// Stop when `||lambda+ - lambda||_inf <= tol (1 + ||lambda||_inf)`.
    pub lambda_tol: f64,
    pub inner: StelaOptions,
}

impl Default for BpOptions {
    fn default() -> Self {
        BpOptions {
            max_outer: 50,
            lambda_tol: 1e-6,
            inner: StelaOptions { tol: 1e-11, max_iter: 20_000, workers: 1 },
        }
    }
}

#[derive(Debug, Clone)]
pub struct BpSolution {
    pub x: Vec<f64>,
    pub lambda: Vec<f64>,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    /// `||Ax - b||_2` at the returned point.
    pub residual: f64,
    /// One row per outer iteration: objective `||x||_1`, error `||Ax - b||_2`.
    pub trace: IterateTrace,
}

/// Basis pursuit `min ||x||_1 s.t. Ax = b` by the method of multipliers.
///
/// Each outer step minimizes `||x||_1 + lambda^T (Ax - b) + c/2 ||Ax - b||^2`,
/// which after dividing by `c` is a LASSO problem with data
/// `b - lambda / c` and weight `1 / c`, solved by warm-started STELA.
pub fn basis_pursuit_solve(a: &Matrix, b: &[f64], opts: &BpOptions) -> Result<BpSolution> {
    if b.len() != a.rows() {
        return Err(Error::DimensionMismatch { expected: a.rows(), got: b.len() });
    }
    diag_ata(a)?;
    let k = a.cols();
    let mut lambda = vec![0.0; a.rows()];
    let scale = norm_inf(&a.tr_mul_vec(b));
    let started = std::time::Instant::now();
    let mut trace = IterateTrace::new();
    let record = |trace: &mut IterateTrace, iter: usize, x: &[f64], residual: f64| {
        trace.records.push(IterRecord {
            iter,
            objective: norm1(x),
            gamma: None,
            error: residual,
            seconds: started.elapsed().as_secs_f64(),
            extra: None,
        })
    };
    record(&mut trace, 0, &vec![0.0; k], norm2(b));
    if scale == 0.0 {
        trace.termination = Termination::Converged;
        return Ok(BpSolution { x: vec![0.0; k], lambda, outer_iterations: 0, inner_iterations: 0, residual: norm2(b), trace });
    }
    let mut c = 10.0 / scale;
    let mut x = vec![0.0; k];
    let mut inner_iterations = 0;
    let mut residual = f64::INFINITY;
    for outer in 1..=opts.max_outer {
        let shifted: Vec<f64> = b.iter().zip(&lambda).map(|(bi, li)| bi - li / c).collect();
        let sub = LassoInstance::new(a.clone(), shifted, 1.0 / c)?;
        let sol = stela_solve_from(&sub, x, &opts.inner)?;
        inner_iterations += sol.trace.iterations();
        x = sol.x;
        let r: Vec<f64> = {
            let mut r = a.mul_vec(&x);
            r.iter_mut().zip(b).for_each(|(ri, bi)| *ri -= bi);
            r
        };
        residual = norm2(&r);
        record(&mut trace, outer, &x, residual);
        let step = c * norm_inf(&r);
        let threshold = opts.lambda_tol * (1.0 + norm_inf(&lambda));
        lambda.iter_mut().zip(&r).for_each(|(l, ri)| *l += c * ri);
        if step <= threshold {
            trace.termination = Termination::Converged;
            return Ok(BpSolution { x, lambda, outer_iterations: outer, inner_iterations, residual, trace });
        }
        c = (2.0 * c).min(100.0);
    }
    Err(Error::BpNotConverged { iterations: opts.max_outer, residual })
}

/// Random LASSO data: Gaussian `A` with unit-norm rows, sparse Gaussian
/// `x_true`, `b = A x_true + e` with Gaussian noise, and
/// `mu = mu_factor ||A^T b||_inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LassoSetup {
    pub n: usize,
    pub k: usize,
    pub density: f64,
    pub noise_var: f64,
    pub mu_factor: f64,
}

impl LassoSetup {
    pub fn new(n: usize, k: usize) -> Self {
        LassoSetup { n, k, density: 0.1, noise_var: 1e-4, mu_factor: 0.1 }
    }

    pub fn generate(&self, seed: u64) -> Result<(LassoInstance, Vec<f64>)> {
        if self.n == 0 || self.k == 0 || !(0.0..=1.0).contains(&self.density) || !(self.noise_var >= 0.0) {
            return Err(Error::InvalidParameter(format!("invalid LASSO setup {self:?}")));
        }
        let mut rng = SeededRng::new(seed);
        let mut data: Vec<f64> = (0..self.n * self.k).map(|_| rng.gaussian()).collect();
        for row in data.chunks_mut(self.k) {
            let norm = norm2(row);
            row.iter_mut().for_each(|v| *v /= norm);
        }
        let a = Matrix::from_row_major(self.n, self.k, data)?;
        let nnz = ((self.density * self.k as f64).round() as usize).clamp(1, self.k);
        let mut x_true = vec![0.0; self.k];
        for idx in rng.sample_indices(self.k, nnz) {
            x_true[idx] = rng.gaussian();
        }
        let sigma = self.noise_var.sqrt();
        let mut b = a.mul_vec(&x_true);
        b.iter_mut().for_each(|v| *v += sigma * rng.gaussian());
        let mu = self.mu_factor * norm_inf(&a.tr_mul_vec(&b));
        Ok((LassoInstance::new(a, b, mu)?, x_true))
    }
}
