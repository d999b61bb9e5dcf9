#![allow(dead_code)]

use sca_kit::engine::{
    CompositeProblem, DcProblem, FeasibleSet, ProxProblem, SmoothProblem, VectorProblem,
};
use sca_kit::numerics::Matrix;
use sca_kit::rng::SeededRng;

/// `1/2 x^T Q x + c^T x` over a box, with `Q` symmetric and possibly
/// indefinite. Split as `(f + rho/2 ||x||^2) - rho/2 ||x||^2`.
pub struct BoxQuadratic {
    pub q: Vec<Vec<f64>>,
    pub c: Vec<f64>,
    pub rho: f64,
    pub set: FeasibleSet,
    pub convex: bool,
}

impl BoxQuadratic {
    /// Random instance; `shift` is added to the diagonal so a large shift
    /// makes the problem convex.
    pub fn random(n: usize, shift: f64, seed: u64) -> Self {
        let mut rng = SeededRng::new(seed);
        let mut q = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..=i {
                let v = rng.gaussian();
                q[i][j] = v;
                q[j][i] = v;
            }
            q[i][i] += shift;
        }
        let c = (0..n).map(|_| 2.0 * rng.gaussian()).collect();
        let frob = q.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
        let convex = min_eigenvalue_sym(&q) >= 0.0;
        let set = FeasibleSet::bounded_box(vec![-1.0; n], vec![1.0; n]).unwrap();
        BoxQuadratic { q, c, rho: frob, set, convex }
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    fn qx(&self, x: &[f64]) -> Vec<f64> {
        self.q.iter().map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }
}

/// Smallest eigenvalue of a symmetric matrix by Jacobi rotations, kept
/// here so the test oracle does not reuse library code.
pub fn min_eigenvalue_sym(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |j| *j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-22 {
            break;
        }
        for p in 0..n {
            for r in p + 1..n {
                if a[p][r].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[r][r] - a[p][p]) / (2.0 * a[p][r]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let cs = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * cs;
                for k in 0..n {
                    let (akp, akr) = (a[k][p], a[k][r]);
                    a[k][p] = cs * akp - sn * akr;
                    a[k][r] = sn * akp + cs * akr;
                }
                for k in 0..n {
                    let (apk, ark) = (a[p][k], a[r][k]);
                    a[p][k] = cs * apk - sn * ark;
                    a[r][k] = sn * apk + cs * ark;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).fold(f64::INFINITY, f64::min)
}

impl SmoothProblem for BoxQuadratic {
    type Point = Vec<f64>;

    fn value(&self, x: &Vec<f64>) -> f64 {
        let qx = self.qx(x);
        0.5 * x.iter().zip(&qx).map(|(a, b)| a * b).sum::<f64>() + self.c.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
    }

    fn gradient(&self, x: &Vec<f64>) -> Vec<f64> {
        self.qx(x).iter().zip(&self.c).map(|(a, b)| a + b).collect()
    }

    fn initial_point(&self) -> Vec<f64> {
        vec![0.0; self.dim()]
    }

    fn is_convex(&self) -> bool {
        self.convex
    }
}

impl CompositeProblem for BoxQuadratic {
    fn nonsmooth(&self, _x: &Vec<f64>) -> f64 {
        0.0
    }
}

impl VectorProblem for BoxQuadratic {
    fn feasible_set(&self) -> &FeasibleSet {
        &self.set
    }

    fn lipschitz(&self) -> Option<f64> {
        Some(self.rho)
    }
}

impl ProxProblem for BoxQuadratic {
    fn prox(&self, v: &[f64], _s: f64) -> Vec<f64> {
        self.set.project(v)
    }
}

impl DcProblem for BoxQuadratic {
    fn convex_value(&self, x: &[f64]) -> f64 {
        self.value(&x.to_vec()) + 0.5 * self.rho * x.iter().map(|v| v * v).sum::<f64>()
    }

    fn convex_gradient(&self, x: &[f64]) -> Vec<f64> {
        self.gradient(&x.to_vec()).iter().zip(x).map(|(g, v)| g + self.rho * v).collect()
    }

    fn concave_part_value(&self, x: &[f64]) -> f64 {
        0.5 * self.rho * x.iter().map(|v| v * v).sum::<f64>()
    }

    fn concave_part_gradient(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|v| self.rho * v).collect()
    }
}

/// Solves a small dense system by Gaussian elimination with partial
/// pivoting; `None` when (numerically) singular.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-300);
    for col in 0..n {
        let pivot = (col..n).max_by(|i, j| a[*i][col].abs().total_cmp(&a[*j][col].abs()))?;
        if a[pivot][col].abs() <= 1e-12 * scale {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Exact LASSO optimum by enumerating every support and sign pattern and
/// keeping the best candidate that satisfies the optimality conditions.
pub fn lasso_by_sign_enumeration(a: &Matrix, b: &[f64], mu: f64) -> (Vec<f64>, f64) {
    let (n, k) = (a.rows(), a.cols());
    let col = |j: usize| (0..n).map(|i| a.get(i, j)).collect::<Vec<f64>>();
    let cols: Vec<Vec<f64>> = (0..k).map(col).collect();
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
    let objective = |x: &[f64]| {
        let r: Vec<f64> = (0..n).map(|i| (0..k).map(|j| a.get(i, j) * x[j]).sum::<f64>() - b[i]).collect();
        0.5 * dot(&r, &r) + mu * x.iter().map(|v| v.abs()).sum::<f64>()
    };
    let mut best = (vec![0.0; k], objective(&vec![0.0; k]));
    for mask in 1u32..(1 << k) {
        let support: Vec<usize> = (0..k).filter(|j| mask & (1 << j) != 0).collect();
        let m = support.len();
        if m > n {
            continue;
        }
        let gram: Vec<Vec<f64>> = support.iter().map(|i| support.iter().map(|j| dot(&cols[*i], &cols[*j])).collect()).collect();
        let atb: Vec<f64> = support.iter().map(|j| dot(&cols[*j], b)).collect();
        for signs in 0u32..(1 << m) {
            let s: Vec<f64> = (0..m).map(|i| if signs & (1 << i) != 0 { 1.0 } else { -1.0 }).collect();
            let rhs: Vec<f64> = atb.iter().zip(&s).map(|(v, si)| v - mu * si).collect();
            let Some(xs) = solve_dense(gram.clone(), rhs) else { continue };
            if xs.iter().zip(&s).any(|(x, si)| x * si <= 0.0) {
                continue;
            }
            let mut x = vec![0.0; k];
            for (idx, j) in support.iter().enumerate() {
                x[*j] = xs[idx];
            }
            let value = objective(&x);
            if value < best.1 {
                best = (x, value);
            }
        }
    }
    best
}

/// Minimum l1 norm over `{x : Ax = b}` for a full-row-rank `2 x k` matrix,
/// by enumerating the basic solutions of the equivalent linear program.
pub fn min_l1_two_rows(a: &Matrix, b: &[f64]) -> f64 {
    assert_eq!(a.rows(), 2);
    let k = a.cols();
    let mut best = f64::INFINITY;
    for i in 0..k {
        for j in i + 1..k {
            let m = vec![vec![a.get(0, i), a.get(0, j)], vec![a.get(1, i), a.get(1, j)]];
            if let Some(x) = solve_dense(m, b.to_vec()) {
                best = best.min(x[0].abs() + x[1].abs());
            }
        }
        // single-column solutions when b is parallel to a column
        let (c0, c1) = (a.get(0, i), a.get(1, i));
        let t = (c0 * b[0] + c1 * b[1]) / (c0 * c0 + c1 * c1);
        if ((c0 * t - b[0]).powi(2) + (c1 * t - b[1]).powi(2)).sqrt() <= 1e-12 * (1.0 + b[0].abs() + b[1].abs()) {
            best = best.min(t.abs());
        }
    }
    best
}

/// Maximizer of a unimodal function on `[a, b]` by golden-section search.
pub fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    [a, mid, b].into_iter().max_by(|x, y| f(*x).total_cmp(&f(*y))).unwrap()
}

/// Central-difference check of a gradient; returns the largest absolute
/// deviation relative to `1 + |analytic|`.
pub fn fd_check<F: Fn(&[f64]) -> f64>(f: F, grad: &[f64], x: &[f64], h: f64) -> f64 {
    let mut worst = 0.0_f64;
    let mut probe = x.to_vec();
    for k in 0..x.len() {
        probe[k] = x[k] + h;
        let up = f(&probe);
        probe[k] = x[k] - h;
        let down = f(&probe);
        probe[k] = x[k];
        let fd = (up - down) / (2.0 * h);
        worst = worst.max((fd - grad[k]).abs() / (1.0 + grad[k].abs()));
    }
    worst
}
