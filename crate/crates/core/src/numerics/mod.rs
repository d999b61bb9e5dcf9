//! Scalar and vector kernels shared by the engine and the application
//! solvers: bracketed bisection, box projection, soft-thresholding, a
//! central-difference gradient checker, plus dense real and complex
//! matrix helpers.

mod complex;
mod dense;

pub use complex::{hermitian_eig, CMatrix, HermitianEig, HermitianMatrix};
pub use dense::Matrix;

use crate::error::{Error, Result};

/// Closed interval `[lo, hi]` with finite, ordered endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !lo.is_finite() || !hi.is_finite() || lo > hi {
            return Err(Error::InvalidInterval { lo, hi });
        }
        Ok(Interval { lo, hi })
    }

    pub fn unit() -> Self {
        Interval { lo: 0.0, hi: 1.0 }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.max(self.lo).min(self.hi)
    }
}

pub const DEFAULT_BISECTION_TOL: f64 = 1e-8;
pub const DEFAULT_BISECTION_MAX_ITER: usize = 64;

/// Outcome of [`bisect_root`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bisection {
    pub root: f64,
    /// Number of halvings performed.
    pub iterations: usize,
    /// Width of the final bracket.
    pub width: f64,
}

/// Root of a nondecreasing scalar function on `iv`.
///
/// Stops when the bracket is narrower than `tol`, when `|g| <= tol` at the
/// current midpoint, or after `max_iter` halvings, whichever comes first.
/// Each iteration halves the bracket exactly.
pub fn bisect_root<G>(g: G, iv: Interval, tol: f64, max_iter: usize) -> Result<Bisection>
where
    G: FnMut(f64) -> f64,
{
    bisect_root_with(g, iv, tol, tol, max_iter)
}

/// [`bisect_root`] with separate tolerances on the bracket width and on
/// the function value.
pub fn bisect_root_with<G>(
    mut g: G,
    iv: Interval,
    x_tol: f64,
    f_tol: f64,
    max_iter: usize,
) -> Result<Bisection>
where
    G: FnMut(f64) -> f64,
{
    let (mut lo, mut hi) = (iv.lo, iv.hi);
    let g_lo = eval(&mut g, lo)?;
    if g_lo.abs() <= f_tol {
        return Ok(Bisection { root: lo, iterations: 0, width: hi - lo });
    }
    let g_hi = eval(&mut g, hi)?;
    if g_hi.abs() <= f_tol {
        return Ok(Bisection { root: hi, iterations: 0, width: hi - lo });
    }
    if g_lo > 0.0 || g_hi < 0.0 {
        return Err(Error::NoBracket { lo, hi, g_lo, g_hi });
    }

    let mut iterations = 0;
    while hi - lo > x_tol && iterations < max_iter {
        let mid = 0.5 * (lo + hi);
        let g_mid = eval(&mut g, mid)?;
        iterations += 1;
        if g_mid.abs() <= f_tol {
            return Ok(Bisection { root: mid, iterations, width: hi - lo });
        }
        if g_mid > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Bisection {
        root: 0.5 * (lo + hi),
        iterations,
        width: hi - lo,
    })
}

fn eval<G: FnMut(f64) -> f64>(g: &mut G, x: f64) -> Result<f64> {
    let v = g(x);
    if v.is_nan() {
        Err(Error::InvalidFunctionValue { at: x })
    } else {
        Ok(v)
    }
}

/// Elementwise `max(min(x, hi), lo)`.
pub fn project_box(x: &[f64], lo: &[f64], hi: &[f64]) -> Result<Vec<f64>> {
    check_len(x.len(), lo.len())?;
    check_len(x.len(), hi.len())?;
    Ok(x.iter()
        .zip(lo.iter().zip(hi))
        .map(|(&v, (&l, &h))| v.min(h).max(l))
        .collect())
}

/// `S_a(b) = [b - a]^+ - [-b - a]^+` for a scalar threshold `a >= 0`.
#[inline]
pub fn shrink(b: f64, a: f64) -> f64 {
    (b - a).max(0.0) - (-b - a).max(0.0)
}

/// Elementwise soft-thresholding operator.
pub fn soft_threshold(b: &[f64], a: &[f64]) -> Result<Vec<f64>> {
    check_len(b.len(), a.len())?;
    if let Some((index, &value)) = a.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        return Err(Error::NegativeThreshold { index, value });
    }
    Ok(b.iter().zip(a).map(|(&bi, &ai)| shrink(bi, ai)).collect())
}

/// Worst relative deviation between an analytic gradient and central
/// differences with step `h`, measured as `|g - fd| / (1 + |g|)` per
/// component. NaN anywhere yields NaN.
pub fn check_gradient<F, G>(f: F, grad: G, x: &[f64], h: f64) -> f64
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    let analytic = grad(x);
    if analytic.len() != x.len() {
        return f64::NAN;
    }
    let mut probe = x.to_vec();
    let mut worst = 0.0_f64;
    for k in 0..x.len() {
        probe[k] = x[k] + h;
        let up = f(&probe);
        probe[k] = x[k] - h;
        let down = f(&probe);
        probe[k] = x[k];
        let fd = (up - down) / (2.0 * h);
        let dev = (analytic[k] - fd).abs() / (1.0 + analytic[k].abs());
        if dev.is_nan() {
            return f64::NAN;
        }
        worst = worst.max(dev);
    }
    worst
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        Err(Error::DimensionMismatch { expected, got })
    } else {
        Ok(())
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm1(a: &[f64]) -> f64 {
    a.iter().map(|v| v.abs()).sum()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bisect_linear_root() {
        let b = bisect_root(|g| 2.0 * g - 0.6, Interval::unit(), 1e-10, 64).unwrap();
        assert!((b.root - 0.3).abs() < 1e-10);
    }

    #[test]
    fn bisect_odd_cubic() {
        let iv = Interval::new(-1.0, 1.0).unwrap();
        // midpoint hits the root exactly on the first halving
        let b = bisect_root(|g| g * g * g, iv, 1e-8, 64).unwrap();
        assert_eq!(b.root, 0.0);
    }

    #[test]
    fn bisect_lasso_line_restriction() {
        // f(x) = 1/2 ||A x - b||^2, A = diag(1, 2), b = (1, 1), x = 0, d = (1, 0):
        // f(gamma d) = 1/2 (gamma - 1)^2 + 1/2, minimized at gamma = 1.
        // Use d = (0.5, 0) instead so the minimizer is interior: gamma* = 2
        // is outside, so scale the interval to [0, 4].
        let a = [[1.0, 0.0], [0.0, 2.0]];
        let b = [1.0, 1.0];
        let d = [0.5, 0.0];
        let deriv = |g: f64| {
            let x = [g * d[0], g * d[1]];
            let r = [
                a[0][0] * x[0] + a[0][1] * x[1] - b[0],
                a[1][0] * x[0] + a[1][1] * x[1] - b[1],
            ];
            let ad = [
                a[0][0] * d[0] + a[0][1] * d[1],
                a[1][0] * d[0] + a[1][1] * d[1],
            ];
            r[0] * ad[0] + r[1] * ad[1]
        };
        // analytic minimizer: gamma* = -(r0^T A d) / ||A d||^2 = 0.5 / 0.25 = 2
        let iv = Interval::new(0.0, 4.0).unwrap();
        let b = bisect_root(deriv, iv, 1e-12, 64).unwrap();
        assert!((b.root - 2.0).abs() < 1e-10);

        // d = (1, 0) on [0, 1]: f(gamma d) = 1/2 (gamma - 1)^2 + 1/2, minimizer gamma* = 1
        let deriv_unit = |g: f64| (g - 1.0) * 1.0;
        let b = bisect_root(deriv_unit, Interval::unit(), 1e-10, 64).unwrap();
        assert!((b.root - 1.0).abs() < 1e-10);
    }

    #[test]
    fn bisect_rejects_same_sign() {
        let err = bisect_root(|g| g + 5.0, Interval::unit(), 1e-8, 64).unwrap_err();
        assert!(matches!(err, Error::NoBracket { .. }));
    }

    #[test]
    fn bisect_accepts_boundary_root() {
        let b = bisect_root(|g| g - 1.0, Interval::unit(), 1e-8, 64).unwrap();
        assert_eq!(b.root, 1.0);
        assert_eq!(b.iterations, 0);
    }

    #[test]
    fn bisect_reports_nan() {
        let err = bisect_root(|g| if g > 0.4 { f64::NAN } else { g - 0.5 }, Interval::unit(), 1e-8, 64)
            .unwrap_err();
        assert!(matches!(err, Error::InvalidFunctionValue { .. }));
    }

    #[test]
    fn bisect_halves_bracket() {
        // no value tolerance, so only the bracket width stops the loop
        let b = bisect_root_with(|g| g - 1.0 / 3.0, Interval::unit(), 1e-6, 0.0, 64).unwrap();
        assert_eq!(b.width, 0.5_f64.powi(b.iterations as i32));
        assert!(b.width <= 1e-6);
        let capped = bisect_root(|g| g - 1.0 / 3.0, Interval::unit(), 0.0, 10).unwrap();
        assert_eq!(capped.iterations, 10);
        assert_eq!(capped.width, 0.5_f64.powi(10));
    }

    #[test]
    fn interval_validation() {
        assert!(Interval::new(1.0, 0.0).is_err());
        assert!(Interval::new(0.0, f64::INFINITY).is_err());
        assert!(Interval::new(0.5, 0.5).is_ok());
    }

    #[test]
    fn project_box_examples() {
        assert_eq!(project_box(&[2.0, -2.0], &[0.0, 0.0], &[1.0, 1.0]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(project_box(&[0.37], &[0.0], &[1.0]).unwrap(), vec![0.37]);
        let inside = [0.1, -0.4, 0.9];
        assert_eq!(project_box(&inside, &[-1.0; 3], &[1.0; 3]).unwrap(), inside.to_vec());
        assert!(project_box(&[1.0], &[0.0, 0.0], &[1.0]).is_err());
    }

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(soft_threshold(&[2.0], &[1.0]).unwrap(), vec![1.0]);
        assert_eq!(soft_threshold(&[-0.5], &[1.0]).unwrap(), vec![0.0]);
        let b = [1.5, -2.25, 0.0];
        assert_eq!(soft_threshold(&b, &[0.0; 3]).unwrap(), b.to_vec());
        assert!(matches!(
            soft_threshold(&[1.0], &[-0.1]),
            Err(Error::NegativeThreshold { index: 0, .. })
        ));
    }

    #[test]
    fn gradient_check_quadratic() {
        let f = |x: &[f64]| 0.5 * dot(x, x);
        let g = |x: &[f64]| x.to_vec();
        let dev = check_gradient(f, g, &[0.3, -1.7, 4.2], 1e-5);
        assert!(dev <= 1e-7, "{dev}");
    }

    #[test]
    fn gradient_check_flags_wrong_gradient() {
        let f = |x: &[f64]| 0.5 * dot(x, x);
        let g = |x: &[f64]| x.iter().map(|v| 2.0 * v).collect();
        assert!(check_gradient(f, g, &[1.0, 2.0], 1e-5) > 0.1);
        let nan = check_gradient(|_| f64::NAN, |x: &[f64]| x.to_vec(), &[1.0], 1e-5);
        assert!(nan.is_nan());
    }

    proptest! {
        #[test]
        fn project_box_idempotent_nonexpansive(
            pts in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0, 0.0f64..3.0, -2.0f64..0.0), 1..8)
        ) {
            let x: Vec<f64> = pts.iter().map(|p| p.0).collect();
            let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
            let lo: Vec<f64> = pts.iter().map(|p| p.3).collect();
            let hi: Vec<f64> = pts.iter().map(|p| p.3 + p.2).collect();
            let px = project_box(&x, &lo, &hi).unwrap();
            let py = project_box(&y, &lo, &hi).unwrap();
            prop_assert_eq!(&project_box(&px, &lo, &hi).unwrap(), &px);
            let dxy = x.iter().zip(&y).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            let dp = px.iter().zip(&py).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            prop_assert!(dp <= dxy + 1e-15);
        }

        #[test]
        fn soft_threshold_shrinks_toward_zero(b in -10.0f64..10.0, a in 0.0f64..5.0) {
            let s = shrink(b, a);
            prop_assert!(s.abs() <= b.abs());
            prop_assert!(s == 0.0 || s.signum() == b.signum());
        }
    }
}
