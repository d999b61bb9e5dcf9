use crate::error::{Error, Result};
use crate::numerics::{norm_inf, CMatrix};
use crate::rng::SeededRng;

/// Iterate representation the engine can move along a direction.
pub trait Point: Clone + Send + Sync {
    /// `self + gamma * d`.
    fn axpy(&self, gamma: f64, d: &Self) -> Self;
    /// `self - other`.
    fn sub(&self, other: &Self) -> Self;
    /// Real inner product (real part of the trace form for complex points).
    fn inner(&self, other: &Self) -> f64;
    fn max_abs(&self) -> f64;
    fn is_finite(&self) -> bool;
}

impl Point for Vec<f64> {
    fn axpy(&self, gamma: f64, d: &Self) -> Self {
        self.iter().zip(d).map(|(x, di)| x + gamma * di).collect()
    }

    fn sub(&self, other: &Self) -> Self {
        self.iter().zip(other).map(|(a, b)| a - b).collect()
    }

    fn inner(&self, other: &Self) -> f64 {
        crate::numerics::dot(self, other)
    }

    fn max_abs(&self) -> f64 {
        norm_inf(self)
    }

    fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }
}

impl Point for Vec<CMatrix> {
    fn axpy(&self, gamma: f64, d: &Self) -> Self {
        self.iter().zip(d).map(|(x, di)| x.add(&di.scale(gamma))).collect()
    }

    fn sub(&self, other: &Self) -> Self {
        self.iter().zip(other).map(|(a, b)| a.sub(b)).collect()
    }

    fn inner(&self, other: &Self) -> f64 {
        self.iter().zip(other).map(|(a, b)| a.inner(b)).sum()
    }

    fn max_abs(&self) -> f64 {
        self.iter().fold(0.0, |m, q| m.max(q.max_abs()))
    }

    fn is_finite(&self) -> bool {
        self.iter().all(|q| q.as_slice().iter().all(|z| z.re.is_finite() && z.im.is_finite()))
    }
}

/// Differentiable objective `f` over a convex feasible set, minimized.
pub trait SmoothProblem: Sync {
    type Point: Point;

    fn value(&self, x: &Self::Point) -> f64;
    fn gradient(&self, x: &Self::Point) -> Self::Point;

    fn initial_point(&self) -> Self::Point;

    /// Declared convexity of `f`. Exact line search by bisection is only
    /// used for convex problems.
    fn is_convex(&self) -> bool {
        false
    }

    /// Application-specific stationarity measure. `None` selects
    /// `-grad f(x)^T (Bx - x)` (plus the nonsmooth gap on composite paths).
    fn stationarity(&self, _x: &Self::Point, _bx: &Self::Point) -> Option<f64> {
        None
    }

    /// Closed-form minimizer over `[0, 1]` of `f(x + gamma d) + gamma g_gap`.
    fn line_minimizer(&self, _x: &Self::Point, _d: &Self::Point, _g_gap: f64) -> Option<f64> {
        None
    }

    /// Cleanup applied to every new iterate (e.g. PSD repair).
    fn repair(&self, x: Self::Point) -> Result<Self::Point> {
        Ok(x)
    }

    /// Extra value recorded in traces (sum rate, energy efficiency).
    fn reported_value(&self, _x: &Self::Point) -> Option<f64> {
        None
    }
}

/// `f + g` with `g` convex and possibly nonsmooth.
pub trait CompositeProblem: SmoothProblem {
    fn nonsmooth(&self, x: &Self::Point) -> f64;
}

/// Convex feasible sets with projection and linear minimization.
#[derive(Debug, Clone, PartialEq)]
pub enum FeasibleSet {
    Unconstrained { dim: usize },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// `{x >= 0, sum x <= budget}`.
    PowerBudget { dim: usize, budget: f64 },
}

impl FeasibleSet {
    pub fn bounded_box(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        crate::numerics::check_len(lo.len(), hi.len())?;
        for (l, h) in lo.iter().zip(&hi) {
            crate::numerics::Interval::new(*l, *h)?;
        }
        Ok(FeasibleSet::Box { lo, hi })
    }

    pub fn dim(&self) -> usize {
        match self {
            FeasibleSet::Unconstrained { dim } | FeasibleSet::PowerBudget { dim, .. } => *dim,
            FeasibleSet::Box { lo, .. } => lo.len(),
        }
    }

    /// Bounds of coordinate `k` when the set is a Cartesian product.
    pub fn coordinate_bounds(&self, k: usize) -> Option<(f64, f64)> {
        match self {
            FeasibleSet::Unconstrained { .. } => Some((f64::NEG_INFINITY, f64::INFINITY)),
            FeasibleSet::Box { lo, hi } => Some((lo[k], hi[k])),
            FeasibleSet::PowerBudget { .. } => None,
        }
    }

    pub fn is_cartesian(&self) -> bool {
        !matches!(self, FeasibleSet::PowerBudget { .. })
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        match self {
            FeasibleSet::Unconstrained { .. } => true,
            FeasibleSet::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(v, (l, h))| *v >= l - tol && *v <= h + tol),
            FeasibleSet::PowerBudget { budget, .. } => {
                x.iter().all(|v| *v >= -tol) && x.iter().sum::<f64>() <= budget + tol
            }
        }
    }

    /// Euclidean projection.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        match self {
            FeasibleSet::Unconstrained { .. } => x.to_vec(),
            FeasibleSet::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(v, (l, h))| v.min(*h).max(*l))
                .collect(),
            FeasibleSet::PowerBudget { budget, .. } => project_capped_simplex(x, *budget),
        }
    }

    /// `argmin_{y in X} c^T y`. Ties keep the coordinate of `x` where the
    /// set allows it, so a stationary `x` maps to itself.
    pub fn linear_minimizer(&self, c: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        match self {
            FeasibleSet::Unconstrained { .. } => Err(Error::SubproblemInfeasible(
                "linear minimization over an unbounded set".into(),
            )),
            FeasibleSet::Box { lo, hi } => {
                if lo.iter().chain(hi).any(|v| !v.is_finite()) {
                    return Err(Error::SubproblemInfeasible(
                        "linear minimization over an unbounded box".into(),
                    ));
                }
                Ok(c.iter()
                    .zip(x)
                    .zip(lo.iter().zip(hi))
                    .map(|((ci, xi), (l, h))| {
                        if *ci > 0.0 {
                            *l
                        } else if *ci < 0.0 {
                            *h
                        } else {
                            *xi
                        }
                    })
                    .collect())
            }
            FeasibleSet::PowerBudget { dim, budget } => {
                let mut y = vec![0.0; *dim];
                let (k, cmin) = c
                    .iter()
                    .enumerate()
                    .fold((0, f64::INFINITY), |(bk, bv), (k, v)| if *v < bv { (k, *v) } else { (bk, bv) });
                if cmin < 0.0 {
                    y[k] = *budget;
                }
                Ok(y)
            }
        }
    }

    /// Uniform random point of the set (bounded sets only; unconstrained
    /// coordinates are drawn from `[-1, 1]`).
    pub fn sample(&self, rng: &mut SeededRng) -> Vec<f64> {
        match self {
            FeasibleSet::Unconstrained { dim } => (0..*dim).map(|_| rng.uniform_range(-1.0, 1.0)).collect(),
            FeasibleSet::Box { lo, hi } => lo
                .iter()
                .zip(hi)
                .map(|(l, h)| {
                    let l = if l.is_finite() { *l } else { -1.0 };
                    let h = if h.is_finite() { *h } else { l + 2.0 };
                    rng.uniform_range(l, h)
                })
                .collect(),
            FeasibleSet::PowerBudget { dim, budget } => {
                let raw: Vec<f64> = (0..*dim).map(|_| rng.uniform()).collect();
                let scale = rng.uniform() * budget / raw.iter().sum::<f64>().max(1e-300);
                raw.iter().map(|v| v * scale).collect()
            }
        }
    }
}

/// Projection onto `{x >= 0, sum x <= budget}`.
fn project_capped_simplex(x: &[f64], budget: f64) -> Vec<f64> {
    let clipped: Vec<f64> = x.iter().map(|v| v.max(0.0)).collect();
    if clipped.iter().sum::<f64>() <= budget {
        return clipped;
    }
    // sort-based projection onto the simplex {y >= 0, sum y = budget}
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (i, v) in sorted.iter().enumerate() {
        cumulative += v;
        let t = (cumulative - budget) / (i + 1) as f64;
        if v - t > 0.0 {
            theta = t;
        }
    }
    x.iter().map(|v| (v - theta).max(0.0)).collect()
}

/// Problems over `R^n` with an explicit feasible set.
pub trait VectorProblem: SmoothProblem<Point = Vec<f64>> {
    fn feasible_set(&self) -> &FeasibleSet;

    /// Lipschitz constant of the gradient, if known.
    fn lipschitz(&self) -> Option<f64> {
        None
    }

    /// `d f / d x_k`.
    fn partial(&self, k: usize, x: &[f64]) -> f64 {
        self.gradient(&x.to_vec())[k]
    }
}

/// Composite vector problems with a computable proximal map.
pub trait ProxProblem: CompositeProblem<Point = Vec<f64>> + VectorProblem {
    /// `argmin_{y in X} s g(y) + 1/2 ||y - v||^2`.
    fn prox(&self, v: &[f64], s: f64) -> Vec<f64>;
}

/// `f = f1 - f2` with both parts convex.
pub trait DcProblem: VectorProblem {
    fn convex_value(&self, x: &[f64]) -> f64;
    fn convex_gradient(&self, x: &[f64]) -> Vec<f64>;
    fn concave_part_value(&self, x: &[f64]) -> f64;
    fn concave_part_gradient(&self, x: &[f64]) -> Vec<f64>;
}

/// Views a smooth vector problem as a composite problem with `g = 0`
/// whose proximal map is the projection onto the feasible set.
pub struct ZeroNonsmooth<'a, P>(pub &'a P);

impl<P: VectorProblem> SmoothProblem for ZeroNonsmooth<'_, P> {
    type Point = Vec<f64>;

    fn value(&self, x: &Vec<f64>) -> f64 {
        self.0.value(x)
    }

    fn gradient(&self, x: &Vec<f64>) -> Vec<f64> {
        self.0.gradient(x)
    }

    fn initial_point(&self) -> Vec<f64> {
        self.0.initial_point()
    }

    fn is_convex(&self) -> bool {
        self.0.is_convex()
    }

    fn stationarity(&self, x: &Vec<f64>, bx: &Vec<f64>) -> Option<f64> {
        self.0.stationarity(x, bx)
    }

    fn line_minimizer(&self, x: &Vec<f64>, d: &Vec<f64>, g_gap: f64) -> Option<f64> {
        self.0.line_minimizer(x, d, g_gap)
    }
}

impl<P: VectorProblem> CompositeProblem for ZeroNonsmooth<'_, P> {
    fn nonsmooth(&self, _x: &Vec<f64>) -> f64 {
        0.0
    }
}

impl<P: VectorProblem> VectorProblem for ZeroNonsmooth<'_, P> {
    fn feasible_set(&self) -> &FeasibleSet {
        self.0.feasible_set()
    }

    fn lipschitz(&self) -> Option<f64> {
        self.0.lipschitz()
    }

    fn partial(&self, k: usize, x: &[f64]) -> f64 {
        self.0.partial(k, x)
    }
}

impl<P: VectorProblem> ProxProblem for ZeroNonsmooth<'_, P> {
    fn prox(&self, v: &[f64], _s: f64) -> Vec<f64> {
        self.feasible_set().project(v)
    }
}

/// Spot-checks convexity of `g` by sampling the midpoint inequality on
/// random feasible pairs. Returns the worst violation
/// `g(mid) - (g(a) + g(b)) / 2` (nonpositive for convex `g`).
pub fn midpoint_convexity_violation<P: ProxProblem>(p: &P, samples: usize, seed: u64) -> f64 {
    let mut rng = SeededRng::new(seed);
    let set = p.feasible_set();
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..samples {
        let a = set.sample(&mut rng);
        let b = set.sample(&mut rng);
        let mid: Vec<f64> = a.iter().zip(&b).map(|(u, v)| 0.5 * (u + v)).collect();
        let gap = p.nonsmooth(&mid) - 0.5 * (p.nonsmooth(&a) + p.nonsmooth(&b));
        worst = worst.max(gap);
    }
    worst
}
