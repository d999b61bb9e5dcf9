use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative tolerance used to decide whether a matrix is Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Dense row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix { rows, cols, data: vec![Complex64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = CMatrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, got: data.len() });
        }
        Ok(CMatrix { rows, cols, data })
    }

    /// Builds a matrix from `(re, im)` pairs laid out row-major.
    pub fn from_interleaved(rows: usize, cols: usize, pairs: &[f64]) -> Result<Self> {
        if pairs.len() != 2 * rows * cols {
            return Err(Error::DimensionMismatch { expected: 2 * rows * cols, got: pairs.len() });
        }
        let data = pairs.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect();
        Ok(CMatrix { rows, cols, data })
    }

    pub fn to_interleaved(&self) -> Vec<f64> {
        self.data.iter().flat_map(|z| [z.re, z.im]).collect()
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = CMatrix::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * n + i] = Complex64::new(d, 0.0);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn adjoint(&self) -> CMatrix {
        let mut t = CMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.get(i, j).conj();
            }
        }
        t
    }

    pub fn matmul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = CMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    /// `self * other^H`
    pub fn matmul_adj(&self, other: &CMatrix) -> CMatrix {
        self.matmul(&other.adjoint())
    }

    /// `A Q A^H` for square `Q`.
    pub fn congruence(&self, q: &CMatrix) -> CMatrix {
        self.matmul(q).matmul_adj(self)
    }

    pub fn add(&self, other: &CMatrix) -> CMatrix {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &CMatrix) -> CMatrix {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> CMatrix {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    /// `self + gamma * (target - self)`
    pub fn lerp(&self, target: &CMatrix, gamma: f64) -> CMatrix {
        self.zip_with(target, |a, b| a + (b - a) * gamma)
    }

    fn zip_with(&self, other: &CMatrix, f: impl Fn(Complex64, Complex64) -> Complex64) -> CMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "shape mismatch");
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    /// Real inner product `Re tr(A^H B)`.
    pub fn inner(&self, other: &CMatrix) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a.conj() * b).re).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest `|A - A^H|` entry relative to the largest entry magnitude.
    pub fn hermitian_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        let mut worst = 0.0_f64;
        for i in 0..self.rows {
            for j in i..self.cols {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst / scale
    }

    /// Replaces the matrix by `(A + A^H) / 2`.
    pub fn symmetrize(&mut self) {
        let n = self.rows;
        for i in 0..n {
            let d = self.get(i, i);
            self.set(i, i, Complex64::new(d.re, 0.0));
            for j in (i + 1)..n {
                let avg = (self.get(i, j) + self.get(j, i).conj()) * 0.5;
                self.set(i, j, avg);
                self.set(j, i, avg.conj());
            }
        }
    }

    /// Lower Cholesky factor `L` with `L L^H = A` of a Hermitian positive
    /// definite matrix.
    pub fn cholesky(&self) -> Result<CMatrix> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch { expected: self.rows, got: self.cols });
        }
        let n = self.rows;
        let mut l = CMatrix::zeros(n, n);
        for j in 0..n {
            let mut diag = self.get(j, j).re;
            for k in 0..j {
                diag -= l.get(j, k).norm_sqr();
            }
            if !(diag > 0.0) {
                return Err(Error::NotPositiveDefinite);
            }
            let ljj = diag.sqrt();
            l.set(j, j, Complex64::new(ljj, 0.0));
            for i in (j + 1)..n {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l.get(i, k) * l.get(j, k).conj();
                }
                l.set(i, j, s / ljj);
            }
        }
        Ok(l)
    }

    /// `log det A` of a Hermitian positive definite matrix.
    pub fn logdet_hpd(&self) -> Result<f64> {
        let l = self.cholesky()?;
        Ok(2.0 * (0..self.rows).map(|i| l.get(i, i).re.ln()).sum::<f64>())
    }

    /// `A^{-1} B` for Hermitian positive definite `A`.
    pub fn solve_hpd(&self, b: &CMatrix) -> Result<CMatrix> {
        let l = self.cholesky()?;
        let n = self.rows;
        let mut x = b.clone();
        for c in 0..b.cols {
            // forward: L y = b
            for i in 0..n {
                let mut s = x.get(i, c);
                for k in 0..i {
                    s -= l.get(i, k) * x.get(k, c);
                }
                x.set(i, c, s / l.get(i, i));
            }
            // backward: L^H x = y
            for i in (0..n).rev() {
                let mut s = x.get(i, c);
                for k in (i + 1)..n {
                    s -= l.get(k, i).conj() * x.get(k, c);
                }
                x.set(i, c, s / l.get(i, i));
            }
        }
        Ok(x)
    }

    pub fn inverse_hpd(&self) -> Result<CMatrix> {
        self.solve_hpd(&CMatrix::identity(self.rows))
    }
}

/// Square complex matrix verified to equal its conjugate transpose.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(CMatrix);

impl HermitianMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch { expected: m.rows, got: m.cols });
        }
        let deviation = m.hermitian_deviation();
        if deviation > HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(HermitianMatrix(m))
    }

    pub fn dim(&self) -> usize {
        self.0.rows
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_inner(self) -> CMatrix {
        self.0
    }
}

/// Eigenvalues sorted in descending order with matching unitary
/// eigenvectors stored column-wise.
#[derive(Debug, Clone)]
pub struct HermitianEig {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl HermitianEig {
    /// `V diag(f(lambda)) V^H`
    pub fn reassemble(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let n = self.values.len();
        let mut out = CMatrix::zeros(n, n);
        for (k, &lam) in self.values.iter().enumerate() {
            let w = f(lam);
            if w == 0.0 {
                continue;
            }
            for i in 0..n {
                let vik = self.vectors.get(i, k) * w;
                for j in 0..n {
                    out.data[i * n + j] += vik * self.vectors.get(j, k).conj();
                }
            }
        }
        out
    }
}

const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi
/// rotations.
pub fn hermitian_eig(m: &HermitianMatrix) -> HermitianEig {
    let n = m.dim();
    let mut a = m.matrix().clone();
    a.symmetrize();
    let mut v = CMatrix::identity(n);
    let scale = a.frobenius();

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a.get(i, j).norm_sqr();
            }
        }
        if off.sqrt() <= 1e-15 * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| a.get(i, i).re).collect();
    order.sort_by(|&i, &j| diag[j].total_cmp(&diag[i]));
    let values = order.iter().map(|&i| diag[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for i in 0..n {
            vectors.set(i, dst, v.get(i, src));
        }
    }
    HermitianEig { values, vectors }
}

/// Annihilates `a[p][q]` with the unitary `G = diag(1, e^{-i phi}) R(theta)`
/// acting on rows/columns `p, q`.
fn rotate(a: &mut CMatrix, v: &mut CMatrix, p: usize, q: usize) {
    let z = a.get(p, q);
    let w = z.norm();
    if w == 0.0 {
        return;
    }
    let phase = (z / w).conj();
    let app = a.get(p, p).re;
    let aqq = a.get(q, q).re;
    let theta = 0.5 * (2.0 * w).atan2(aqq - app);
    let (s, c) = theta.sin_cos();
    // 2x2 block of G
    let g = [
        [Complex64::new(c, 0.0), Complex64::new(s, 0.0)],
        [phase * (-s), phase * c],
    ];
    let n = a.rows;
    // A <- A G (columns p, q)
    for i in 0..n {
        let aip = a.get(i, p);
        let aiq = a.get(i, q);
        a.set(i, p, aip * g[0][0] + aiq * g[1][0]);
        a.set(i, q, aip * g[0][1] + aiq * g[1][1]);
        let vip = v.get(i, p);
        let viq = v.get(i, q);
        v.set(i, p, vip * g[0][0] + viq * g[1][0]);
        v.set(i, q, vip * g[0][1] + viq * g[1][1]);
    }
    // A <- G^H A (rows p, q)
    for j in 0..n {
        let apj = a.get(p, j);
        let aqj = a.get(q, j);
        a.set(p, j, g[0][0].conj() * apj + g[1][0].conj() * aqj);
        a.set(q, j, g[0][1].conj() * apj + g[1][1].conj() * aqj);
    }
    a.set(p, q, Complex64::new(0.0, 0.0));
    a.set(q, p, Complex64::new(0.0, 0.0));
    let dp = a.get(p, p).re;
    let dq = a.get(q, q).re;
    a.set(p, p, Complex64::new(dp, 0.0));
    a.set(q, q, Complex64::new(dq, 0.0));
}
