use rayon::prelude::*;

use super::problem::{DcProblem, FeasibleSet, Point, ProxProblem, SmoothProblem, VectorProblem};
use super::trace::Notice;
use crate::error::{Error, Result};
use crate::numerics::{bisect_root_with, dot, Interval};

/// Produces the best response `Bx` of an approximate subproblem built
/// around the current iterate.
pub trait ApproximationRule<P: SmoothProblem>: Sync {
    fn name(&self) -> &str;

    fn best_response(&self, p: &P, x: &P::Point) -> Result<P::Point>;

    /// The approximate function upper-bounds `f` and is exact at `x^t`,
    /// so the unit stepsize is admissible.
    fn is_upper_bound(&self, _p: &P) -> bool {
        false
    }

    /// Blocks are solved independently against the frozen iterate.
    fn block_parallel(&self) -> bool {
        false
    }

    /// Value of the approximate function at `x` built around `xt`.
    fn surrogate(&self, _p: &P, _x: &P::Point, _xt: &P::Point) -> Option<f64> {
        None
    }

    /// Diagnostics known before iterating.
    fn notices(&self, _p: &P) -> Vec<Notice> {
        Vec::new()
    }
}

/// Rule defined by a closure.
pub struct CustomRule<F> {
    pub name: String,
    pub map: F,
    pub upper_bound: bool,
}

impl<F> CustomRule<F> {
    pub fn new(name: impl Into<String>, map: F) -> Self {
        CustomRule { name: name.into(), map, upper_bound: false }
    }
}

impl<P, F> ApproximationRule<P> for CustomRule<F>
where
    P: SmoothProblem,
    F: Fn(&P, &P::Point) -> Result<P::Point> + Sync,
{
    fn name(&self) -> &str {
        &self.name
    }

    fn best_response(&self, p: &P, x: &P::Point) -> Result<P::Point> {
        (self.map)(p, x)
    }

    fn is_upper_bound(&self, _p: &P) -> bool {
        self.upper_bound
    }
}

/// First-order approximation: `Bx = argmin_{y in X} grad f(x)^T y`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ConditionalGradient;

impl<P: VectorProblem> ApproximationRule<P> for ConditionalGradient {
    fn name(&self) -> &str {
        "conditional_gradient"
    }

    fn best_response(&self, p: &P, x: &Vec<f64>) -> Result<Vec<f64>> {
        p.feasible_set().linear_minimizer(&p.gradient(x), x)
    }

    fn surrogate(&self, p: &P, x: &Vec<f64>, xt: &Vec<f64>) -> Option<f64> {
        Some(p.value(xt) + dot(&p.gradient(xt), &x.sub(xt)))
    }
}

/// `Bx = P_X(x - s H^{-1} grad f(x))` with `H` diagonal (identity when absent).
#[derive(Debug, Clone, PartialEq)]
pub struct GradientProjection {
    pub step: f64,
    pub metric: Option<Vec<f64>>,
}

impl GradientProjection {
    pub fn new(step: f64) -> Self {
        GradientProjection { step, metric: None }
    }

    pub fn with_metric(step: f64, metric: Vec<f64>) -> Self {
        GradientProjection { step, metric: Some(metric) }
    }

    fn scaled_step(&self, k: usize) -> f64 {
        match &self.metric {
            Some(h) => self.step / h[k],
            None => self.step,
        }
    }
}

impl<P: VectorProblem> ApproximationRule<P> for GradientProjection {
    fn name(&self) -> &str {
        "gradient_projection"
    }

    fn best_response(&self, p: &P, x: &Vec<f64>) -> Result<Vec<f64>> {
        if !(self.step > 0.0) {
            return Err(Error::InvalidParameter(format!("projection step must be positive: {}", self.step)));
        }
        if let Some(h) = &self.metric {
            crate::numerics::check_len(x.len(), h.len())?;
            if h.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::InvalidParameter("metric must be positive definite".into()));
            }
            if !p.feasible_set().is_cartesian() {
                return Err(Error::SubproblemInfeasible(
                    "scaled projection needs a Cartesian feasible set".into(),
                ));
            }
        }
        let g = p.gradient(x);
        let v: Vec<f64> = x.iter().zip(&g).enumerate().map(|(k, (xi, gi))| xi - self.scaled_step(k) * gi).collect();
        Ok(p.feasible_set().project(&v))
    }

    fn is_upper_bound(&self, p: &P) -> bool {
        self.metric.is_none() && p.lipschitz().is_some_and(|l| self.step * l <= 1.0)
    }

    fn surrogate(&self, p: &P, x: &Vec<f64>, xt: &Vec<f64>) -> Option<f64> {
        let d = x.sub(xt);
        let quad: f64 = d.iter().enumerate().map(|(k, v)| v * v / self.scaled_step(k)).sum();
        Some(p.value(xt) + dot(&p.gradient(xt), &d) + 0.5 * quad)
    }
}

/// `Bx = prox_{s g}(x - s grad f(x))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProximalGradient {
    pub step: f64,
}

impl ProximalGradient {
    pub fn new(step: f64) -> Self {
        ProximalGradient { step }
    }
}

impl<P: ProxProblem> ApproximationRule<P> for ProximalGradient {
    fn name(&self) -> &str {
        "proximal_gradient"
    }

    fn best_response(&self, p: &P, x: &Vec<f64>) -> Result<Vec<f64>> {
        if !(self.step > 0.0) {
            return Err(Error::InvalidParameter(format!("proximal step must be positive: {}", self.step)));
        }
        let g = p.gradient(x);
        let v: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - self.step * gi).collect();
        Ok(p.prox(&v, self.step))
    }

    fn is_upper_bound(&self, p: &P) -> bool {
        p.lipschitz().is_some_and(|l| self.step * l <= 1.0)
    }

    fn surrogate(&self, p: &P, x: &Vec<f64>, xt: &Vec<f64>) -> Option<f64> {
        let d = x.sub(xt);
        Some(p.value(xt) + dot(&p.gradient(xt), &d) + 0.5 * dot(&d, &d) / self.step)
    }

    fn notices(&self, p: &P) -> Vec<Notice> {
        match p.lipschitz() {
            Some(l) if self.step * l > 1.0 => {
                log::warn!("upper-bound property not guaranteed: step {} > 1/L = {}", self.step, 1.0 / l);
                vec![Notice::UpperBoundNotGuaranteed { step: self.step, bound: 1.0 / l }]
            }
            _ => Vec::new(),
        }
    }
}

/// Scalar-block Jacobi best response: every coordinate minimizes
/// `f(u, x_{-k}) + tau/2 (u - x_k)^2` over its interval with the others
/// frozen. Each block objective must be pseudo-convex in its coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jacobi {
    pub tau: f64,
    /// Evaluate blocks on the rayon pool.
    pub parallel: bool,
}

impl Jacobi {
    pub fn new(tau: f64) -> Self {
        Jacobi { tau, parallel: false }
    }

    pub fn parallel(tau: f64) -> Self {
        Jacobi { tau, parallel: true }
    }

    fn block<P: VectorProblem>(&self, p: &P, x: &[f64], k: usize) -> Result<f64> {
        let (lo, hi) = p.feasible_set().coordinate_bounds(k).ok_or_else(|| {
            Error::SubproblemInfeasible("Jacobi blocks need a Cartesian feasible set".into())
        })?;
        let xk = x[k];
        let mut probe = x.to_vec();
        let mut deriv = |u: f64| {
            probe[k] = u;
            p.partial(k, &probe) + self.tau * (u - xk)
        };
        minimize_scalar_by_derivative(&mut deriv, xk, lo, hi)
    }
}

/// Minimizer of a scalar function with derivative `deriv` over `[lo, hi]`
/// (bounds may be infinite), assuming the derivative changes sign at most
/// once from negative to positive.
pub(crate) fn minimize_scalar_by_derivative<D: FnMut(f64) -> f64>(
    deriv: &mut D,
    start: f64,
    lo: f64,
    hi: f64,
) -> Result<f64> {
    let at_start = deriv(start);
    if at_start.is_nan() {
        return Err(Error::InvalidFunctionValue { at: start });
    }
    if at_start == 0.0 {
        return Ok(start);
    }
    // walk from the start in the descent direction until the derivative
    // changes sign or the bound is reached
    let dir = if at_start < 0.0 { 1.0 } else { -1.0 };
    let bound = if dir > 0.0 { hi } else { lo };
    let mut near = start;
    let mut width = 1.0_f64.max(start.abs());
    let mut far;
    let mut steps = 0;
    loop {
        far = start + dir * width;
        if (dir > 0.0 && far >= bound) || (dir < 0.0 && far <= bound) {
            far = bound;
            let v = deriv(far);
            if v.is_nan() {
                return Err(Error::InvalidFunctionValue { at: far });
            }
            if v * dir <= 0.0 {
                return Ok(far);
            }
            break;
        }
        let v = deriv(far);
        if v.is_nan() {
            return Err(Error::InvalidFunctionValue { at: far });
        }
        if v * dir >= 0.0 {
            break;
        }
        near = far;
        width *= 2.0;
        steps += 1;
        if steps > 200 {
            return Err(Error::SubproblemInfeasible("scalar block subproblem is unbounded".into()));
        }
    }
    let (a, b) = if dir > 0.0 { (near, far) } else { (far, near) };
    let iv = Interval::new(a, b)?;
    let tol = 1e-14 * (1.0 + a.abs().max(b.abs()));
    Ok(bisect_root_with(&mut *deriv, iv, tol, 0.0, 200)?.root)
}

impl<P: VectorProblem> ApproximationRule<P> for Jacobi {
    fn name(&self) -> &str {
        "jacobi"
    }

    fn best_response(&self, p: &P, x: &Vec<f64>) -> Result<Vec<f64>> {
        if !(self.tau >= 0.0) {
            return Err(Error::InvalidParameter(format!("proximal weight must be nonnegative: {}", self.tau)));
        }
        let n = x.len();
        if self.parallel {
            (0..n).into_par_iter().map(|k| self.block(p, x, k)).collect()
        } else {
            (0..n).map(|k| self.block(p, x, k)).collect()
        }
    }

    fn block_parallel(&self) -> bool {
        true
    }
}

/// DC programming: linearize the subtracted convex part,
/// `Bx = argmin_{y in X} f1(y) - grad f2(x)^T y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcLinearize {
    pub inner_tol: f64,
    pub inner_max_iter: usize,
}

impl Default for DcLinearize {
    fn default() -> Self {
        DcLinearize { inner_tol: 1e-12, inner_max_iter: 20_000 }
    }
}

impl<P: DcProblem> ApproximationRule<P> for DcLinearize {
    fn name(&self) -> &str {
        "dc_linearize"
    }

    fn best_response(&self, p: &P, x: &Vec<f64>) -> Result<Vec<f64>> {
        let lin = p.concave_part_gradient(x);
        projected_gradient_descent(
            |y| p.convex_gradient(y).iter().zip(&lin).map(|(a, b)| a - b).collect(),
            p.feasible_set(),
            x,
            self.inner_tol,
            self.inner_max_iter,
        )
    }

    fn is_upper_bound(&self, _p: &P) -> bool {
        true
    }

    fn surrogate(&self, p: &P, x: &Vec<f64>, xt: &Vec<f64>) -> Option<f64> {
        let lin = p.concave_part_gradient(xt);
        Some(p.convex_value(x) - p.concave_part_value(xt) - dot(&lin, &x.sub(xt)))
    }
}

/// Projected gradient for a convex function with gradient `grad` over
/// `set`. The step adapts to a local Lipschitz estimate
/// (`||grad(y+) - grad(y)|| <= ||y+ - y|| / step`), which stays reliable
/// near the optimum where function differences drown in rounding. Stops
/// when `||y - P(y - grad)||_inf <= tol (1 + ||y||_inf)`.
pub fn projected_gradient_descent<G>(grad: G, set: &FeasibleSet, start: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>>
where
    G: Fn(&[f64]) -> Vec<f64>,
{
    let mut y = set.project(start);
    let mut g = grad(&y);
    let mut step = 1.0;
    for _ in 0..max_iter {
        let unit: Vec<f64> = set.project(&y.iter().zip(&g).map(|(a, b)| a - b).collect::<Vec<_>>());
        let residual = y.iter().zip(&unit).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        if residual <= tol * (1.0 + crate::numerics::norm_inf(&y)) {
            return Ok(y);
        }
        step *= 2.0;
        loop {
            let cand = set.project(&y.iter().zip(&g).map(|(a, b)| a - step * b).collect::<Vec<_>>());
            let gc = grad(&cand);
            let d = cand.sub(&y);
            let dg = gc.sub(&g);
            if step * step * dot(&dg, &dg) <= dot(&d, &d) {
                y = cand;
                g = gc;
                break;
            }
            step *= 0.5;
            if step < 1e-30 {
                return Err(Error::NumericalBreakdown("inner projected gradient stalled".into()));
            }
        }
    }
    Ok(y)
}

/// One instance of every built-in rule with the given step and proximal
/// weight.
pub fn builtin_rules<P>(step: f64, tau: f64) -> Vec<Box<dyn ApproximationRule<P>>>
where
    P: ProxProblem + DcProblem,
{
    vec![
        Box::new(ConditionalGradient),
        Box::new(GradientProjection::new(step)),
        Box::new(ProximalGradient::new(step)),
        Box::new(Jacobi::new(tau)),
        Box::new(DcLinearize::default()),
    ]
}
