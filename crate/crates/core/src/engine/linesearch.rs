use serde::{Deserialize, Serialize};

use super::problem::{CompositeProblem, Point, SmoothProblem};
use crate::error::{Error, Result};
use crate::numerics::{bisect_root_with, Interval};

pub const DEFAULT_ARMIJO_ALPHA: f64 = 0.25;
pub const DEFAULT_ARMIJO_BETA: f64 = 0.5;
/// Largest backtracking exponent tried before giving up.
pub const ARMIJO_MAX_STEPS: u32 = 60;

const LINE_BISECTION_TOL: f64 = 1e-10;
const LINE_BISECTION_MAX_ITER: usize = 64;

/// How the engine picks `gamma^t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum StepsizeRule {
    /// Minimize along the direction by bisection on the directional
    /// derivative (convex problems; Armijo otherwise).
    ExactBisection,
    /// Problem-supplied closed-form line minimizer.
    ExactClosedForm,
    Armijo { alpha: f64, beta: f64 },
    Constant { gamma: f64 },
    /// `gamma^{t+1} = gamma^t (1 - rate gamma^t)`.
    Decreasing { initial: f64, rate: f64 },
}

impl StepsizeRule {
    pub fn armijo() -> Self {
        StepsizeRule::Armijo { alpha: DEFAULT_ARMIJO_ALPHA, beta: DEFAULT_ARMIJO_BETA }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match *self {
            StepsizeRule::Armijo { alpha, beta } => {
                if !(alpha > 0.0 && alpha < 1.0 && beta > 0.0 && beta < 1.0) {
                    return bad(format!("armijo parameters must lie in (0,1): alpha={alpha}, beta={beta}"));
                }
            }
            StepsizeRule::Constant { gamma } => {
                if !(gamma > 0.0 && gamma <= 1.0) {
                    return bad(format!("constant stepsize must lie in (0,1]: {gamma}"));
                }
            }
            StepsizeRule::Decreasing { initial, rate } => {
                if !(initial > 0.0 && initial <= 1.0) || !(0.0..1.0).contains(&rate) {
                    return bad(format!("decreasing stepsize needs initial in (0,1], rate in [0,1): {initial}, {rate}"));
                }
            }
            StepsizeRule::ExactBisection | StepsizeRule::ExactClosedForm => {}
        }
        Ok(())
    }

    /// Whether the rule guarantees monotone objective values.
    pub fn is_monotone(&self) -> bool {
        matches!(
            self,
            StepsizeRule::ExactBisection | StepsizeRule::ExactClosedForm | StepsizeRule::Armijo { .. }
        )
    }
}

/// Result of a line search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearch {
    pub gamma: f64,
    /// Backtracking exponent `m` (Armijo) or bisection halvings (exact).
    pub steps: u32,
    /// Set when an exact search fell back to Armijo.
    pub fell_back: bool,
}

/// `f(x + gamma d) - f(x) <= gamma (alpha slope + (alpha - 1) g_gap)`,
/// backtracking `gamma = beta^m` from `m = 0`.
fn armijo_core<F: FnMut(f64) -> f64>(
    mut phi: F,
    f0: f64,
    slope: f64,
    g_gap: f64,
    alpha: f64,
    beta: f64,
) -> Result<LineSearch> {
    let mut gamma = 1.0;
    for m in 0..=ARMIJO_MAX_STEPS {
        let f_new = phi(gamma);
        if f_new.is_nan() {
            return Err(Error::NumericalBreakdown(format!("objective is NaN at stepsize {gamma}")));
        }
        if f_new - f0 <= gamma * (alpha * slope + (alpha - 1.0) * g_gap) {
            return Ok(LineSearch { gamma, steps: m, fell_back: false });
        }
        gamma *= beta;
    }
    Err(Error::LineSearchStalled { steps: ARMIJO_MAX_STEPS })
}

/// Armijo rule `f(x + beta^m d) <= f(x) + alpha beta^m grad f(x)^T d`
/// with the smallest `m >= 0`.
pub fn armijo_smooth<P: SmoothProblem>(p: &P, x: &P::Point, d: &P::Point, alpha: f64, beta: f64) -> Result<LineSearch> {
    let slope = p.gradient(x).inner(d);
    armijo_smooth_with(p, x, d, p.value(x), slope, alpha, beta)
}

pub(crate) fn armijo_smooth_with<P: SmoothProblem>(
    p: &P,
    x: &P::Point,
    d: &P::Point,
    f0: f64,
    slope: f64,
    alpha: f64,
    beta: f64,
) -> Result<LineSearch> {
    if !(slope < 0.0) {
        return Err(Error::NotDescentDirection { slope });
    }
    armijo_core(|g| p.value(&x.axpy(g, d)), f0, slope, 0.0, alpha, beta)
}

/// Nonsmooth Armijo rule: smallest `m` with
/// `f(x + beta^m (Bx - x)) - f(x) <= beta^m (alpha grad f^T (Bx - x) + (alpha - 1)(g(Bx) - g(x)))`.
pub fn armijo_composite<P: CompositeProblem>(
    p: &P,
    x: &P::Point,
    bx: &P::Point,
    alpha: f64,
    beta: f64,
) -> Result<LineSearch> {
    let d = bx.sub(x);
    let slope = p.gradient(x).inner(&d);
    let g_gap = p.nonsmooth(bx) - p.nonsmooth(x);
    armijo_composite_with(p, x, &d, p.value(x), slope, g_gap, alpha, beta)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn armijo_composite_with<P: SmoothProblem>(
    p: &P,
    x: &P::Point,
    d: &P::Point,
    f0: f64,
    slope: f64,
    g_gap: f64,
    alpha: f64,
    beta: f64,
) -> Result<LineSearch> {
    if !(slope + g_gap < 0.0) {
        return Err(Error::NotDescentDirection { slope: slope + g_gap });
    }
    armijo_core(|g| p.value(&x.axpy(g, d)), f0, slope, g_gap, alpha, beta)
}

/// Minimizer over `[0, 1]` of `f(x + gamma d)`; falls back to Armijo with
/// default parameters when `f` is not declared convex.
pub fn exact_linesearch_smooth<P: SmoothProblem>(p: &P, x: &P::Point, d: &P::Point) -> Result<LineSearch> {
    let slope = p.gradient(x).inner(d);
    if !(slope < 0.0) {
        return Err(Error::NotDescentDirection { slope });
    }
    if !p.is_convex() {
        let mut ls = armijo_smooth_with(p, x, d, p.value(x), slope, DEFAULT_ARMIJO_ALPHA, DEFAULT_ARMIJO_BETA)?;
        ls.fell_back = true;
        return Ok(ls);
    }
    exact_bisection(p, x, d, slope, 0.0)
}

/// Bisection on `gamma -> grad f(x + gamma d)^T d + g_gap`, clamped to
/// `[0, 1]`. Requires convexity of `f` along the line.
pub(crate) fn exact_bisection<P: SmoothProblem>(
    p: &P,
    x: &P::Point,
    d: &P::Point,
    slope: f64,
    g_gap: f64,
) -> Result<LineSearch> {
    let deriv = |g: f64| p.gradient(&x.axpy(g, d)).inner(d) + g_gap;
    let at_zero = slope + g_gap;
    if at_zero.is_nan() {
        return Err(Error::InvalidFunctionValue { at: 0.0 });
    }
    if at_zero >= 0.0 {
        return Ok(LineSearch { gamma: 0.0, steps: 0, fell_back: false });
    }
    let at_one = deriv(1.0);
    if at_one.is_nan() {
        return Err(Error::InvalidFunctionValue { at: 1.0 });
    }
    if at_one <= 0.0 {
        return Ok(LineSearch { gamma: 1.0, steps: 0, fell_back: false });
    }
    let b = bisect_root_with(deriv, Interval::unit(), LINE_BISECTION_TOL, 0.0, LINE_BISECTION_MAX_ITER)?;
    Ok(LineSearch { gamma: b.root, steps: b.iterations as u32, fell_back: false })
}
