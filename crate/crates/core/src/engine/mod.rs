//! Successive approximation engine.
//!
//! Each iteration computes a best response `Bx^t` of an approximate
//! subproblem, chooses a stepsize `gamma^t` and moves to
//! `x^{t+1} = x^t + gamma^t (Bx^t - x^t)`. The smooth and composite
//! (`f + g`, `g` convex) paths share one driver; on the composite path the
//! line searches use the differentiable surrogate
//! `f(x + gamma d) + gamma (g(Bx) - g(x))`.

mod linesearch;
mod problem;
mod rules;
mod trace;

use std::time::Instant;

pub use linesearch::{
    armijo_composite, armijo_smooth, exact_linesearch_smooth, LineSearch, StepsizeRule, ARMIJO_MAX_STEPS,
    DEFAULT_ARMIJO_ALPHA, DEFAULT_ARMIJO_BETA,
};
pub use problem::{
    midpoint_convexity_violation, CompositeProblem, DcProblem, FeasibleSet, Point, ProxProblem, SmoothProblem,
    VectorProblem, ZeroNonsmooth,
};
pub use rules::{
    builtin_rules, projected_gradient_descent, ApproximationRule, ConditionalGradient, CustomRule, DcLinearize,
    GradientProjection, Jacobi, ProximalGradient,
};
pub use trace::{IterRecord, IterateTrace, Notice, Termination};


use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 1000;
/// Iterates larger than this in max-norm abort the solve.
pub const DIVERGENCE_GUARD: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StopCriteria {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for StopCriteria {
    fn default() -> Self {
        StopCriteria { tol: DEFAULT_TOL, max_iter: DEFAULT_MAX_ITER }
    }
}

impl StopCriteria {
    pub fn new(tol: f64, max_iter: usize) -> Self {
        StopCriteria { tol, max_iter }
    }
}

#[derive(Debug, Clone)]
pub struct Solution<X> {
    pub x: X,
    pub trace: IterateTrace,
}

/// `-grad f(x)^T (Bx - x)`.
pub fn stationarity_error_smooth<P: SmoothProblem>(p: &P, x: &P::Point, bx: &P::Point) -> f64 {
    -p.gradient(x).inner(&bx.sub(x))
}

pub fn solve_smooth<P, R>(p: &P, rule: &R, step: StepsizeRule, stop: StopCriteria) -> Result<Solution<P::Point>>
where
    P: SmoothProblem,
    R: ApproximationRule<P> + ?Sized,
{
    run(p, rule, step, stop, p.initial_point(), None)
}

pub fn solve_smooth_from<P, R>(
    p: &P,
    rule: &R,
    step: StepsizeRule,
    stop: StopCriteria,
    x0: P::Point,
) -> Result<Solution<P::Point>>
where
    P: SmoothProblem,
    R: ApproximationRule<P> + ?Sized,
{
    run(p, rule, step, stop, x0, None)
}

pub fn solve_composite<P, R>(p: &P, rule: &R, step: StepsizeRule, stop: StopCriteria) -> Result<Solution<P::Point>>
where
    P: CompositeProblem,
    R: ApproximationRule<P> + ?Sized,
{
    run(p, rule, step, stop, p.initial_point(), Some(&|x: &P::Point| p.nonsmooth(x)))
}

pub fn solve_composite_from<P, R>(
    p: &P,
    rule: &R,
    step: StepsizeRule,
    stop: StopCriteria,
    x0: P::Point,
) -> Result<Solution<P::Point>>
where
    P: CompositeProblem,
    R: ApproximationRule<P> + ?Sized,
{
    run(p, rule, step, stop, x0, Some(&|x: &P::Point| p.nonsmooth(x)))
}

type Nonsmooth<'a, X> = Option<&'a dyn Fn(&X) -> f64>;

fn run<P, R>(
    p: &P,
    rule: &R,
    step: StepsizeRule,
    stop: StopCriteria,
    x0: P::Point,
    g: Nonsmooth<'_, P::Point>,
) -> Result<Solution<P::Point>>
where
    P: SmoothProblem,
    R: ApproximationRule<P> + ?Sized,
{
    step.validate()?;
    let mut trace = IterateTrace::new();
    for n in rule.notices(p) {
        trace.push_notice(n);
    }
    let g_at = |x: &P::Point| g.map_or(0.0, |g| g(x));
    let started = Instant::now();
    let mut x = x0;
    let mut decreasing = match step {
        StepsizeRule::Decreasing { initial, .. } => initial,
        _ => 0.0,
    };

    for t in 0.. {
        let f = p.value(&x);
        let gx = g_at(&x);
        let objective = f + gx;
        if objective.is_nan() || !x.is_finite() {
            return Err(Error::NumericalBreakdown(format!("objective is not finite at iteration {t}")));
        }
        let mut record = IterRecord {
            iter: t,
            objective,
            gamma: None,
            error: f64::NAN,
            seconds: started.elapsed().as_secs_f64(),
            extra: p.reported_value(&x),
        };
        if x.max_abs() > DIVERGENCE_GUARD {
            trace.records.push(record);
            trace.termination = Termination::Diverged;
            break;
        }

        let bx = rule.best_response(p, &x)?;
        let d = bx.sub(&x);
        let slope = p.gradient(&x).inner(&d);
        let g_gap = if g.is_some() { g_at(&bx) - gx } else { 0.0 };
        record.error = p.stationarity(&x, &bx).unwrap_or(-(slope + g_gap));

        let descent = slope + g_gap < 0.0;
        let step_norm = d.max_abs();
        if !descent && step_norm > f64::EPSILON.sqrt() * (1.0 + x.max_abs()) {
            trace.records.push(record);
            trace.push_notice(Notice::NonDescentDirection { iter: t, slope: slope + g_gap, step_norm });
            trace.termination = Termination::NonDescent;
            break;
        }
        if record.error <= stop.tol {
            trace.records.push(record);
            trace.termination = Termination::Converged;
            break;
        }
        if t >= stop.max_iter {
            trace.records.push(record);
            trace.termination = Termination::MaxIterations;
            break;
        }
        if !descent {
            trace.records.push(record);
            trace.termination = Termination::Stalled;
            break;
        }

        let searched = match step {
            StepsizeRule::ExactBisection => {
                if p.is_convex() {
                    linesearch::exact_bisection(p, &x, &d, slope, g_gap).map(|ls| ls.gamma)
                } else {
                    trace.push_notice(Notice::ExactFallbackToArmijo { iter: t });
                    armijo(p, rule, &x, &d, f, slope, g_gap, g.is_some(), DEFAULT_ARMIJO_ALPHA, DEFAULT_ARMIJO_BETA)
                }
            }
            StepsizeRule::ExactClosedForm => p.line_minimizer(&x, &d, g_gap).ok_or_else(|| {
                Error::InvalidParameter("problem provides no closed-form line minimizer".into())
            }),
            StepsizeRule::Armijo { alpha, beta } => {
                armijo(p, rule, &x, &d, f, slope, g_gap, g.is_some(), alpha, beta)
            }
            StepsizeRule::Constant { gamma } => Ok(gamma),
            StepsizeRule::Decreasing { rate, .. } => {
                let gamma = decreasing;
                decreasing = gamma * (1.0 - rate * gamma);
                Ok(gamma)
            }
        };
        // sufficient decrease below rounding level: nothing more to gain
        let gamma = match searched {
            Err(Error::LineSearchStalled { .. }) => {
                trace.records.push(record);
                trace.termination = Termination::Stalled;
                break;
            }
            other => other?,
        };
        record.gamma = Some(gamma);
        trace.records.push(record);
        x = p.repair(x.axpy(gamma, &d))?;
    }
    Ok(Solution { x, trace })
}

#[allow(clippy::too_many_arguments)]
fn armijo<P, R>(
    p: &P,
    rule: &R,
    x: &P::Point,
    d: &P::Point,
    f: f64,
    slope: f64,
    g_gap: f64,
    composite: bool,
    alpha: f64,
    beta: f64,
) -> Result<f64>
where
    P: SmoothProblem,
    R: ApproximationRule<P> + ?Sized,
{
    if rule.is_upper_bound(p) {
        return Ok(1.0);
    }
    let ls = if composite {
        linesearch::armijo_composite_with(p, x, d, f, slope, g_gap, alpha, beta)?
    } else {
        linesearch::armijo_smooth_with(p, x, d, f, slope, alpha, beta)?
    };
    Ok(ls.gamma)
}
