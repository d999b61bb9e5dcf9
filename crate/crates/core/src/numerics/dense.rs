use crate::error::{Error, Result};

/// Dense row-major real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, got: data.len() });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch { expected: cols, got: r.len() });
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix { rows: rows.len(), cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// `A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        let mut out = vec![0.0; self.rows];
        self.mul_vec_rows(x, 0, &mut out);
        out
    }

    /// Rows `first..first + out.len()` of `A x`.
    pub fn mul_vec_rows(&self, x: &[f64], first: usize, out: &mut [f64]) {
        for (o, i) in out.iter_mut().zip(first..) {
            *o = super::dot(self.row(i), x);
        }
    }

    /// `A^T y`.
    pub fn tr_mul_vec(&self, y: &[f64]) -> Vec<f64> {
        debug_assert_eq!(y.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        self.tr_mul_vec_cols(y, 0, &mut out);
        out
    }

    /// Columns `first..first + out.len()` of `A^T y`, accumulated row by row
    /// so every entry sees the same summation order regardless of the split.
    pub fn tr_mul_vec_cols(&self, y: &[f64], first: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        let width = out.len();
        for (i, &yi) in y.iter().enumerate() {
            let row = &self.row(i)[first..first + width];
            for (o, &a) in out.iter_mut().zip(row) {
                *o += a * yi;
            }
        }
    }

    /// Squared column norms, i.e. the diagonal of `A^T A`.
    pub fn column_sq_norms(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (dk, &a) in d.iter_mut().zip(self.row(i)) {
                *dk += a * a;
            }
        }
        d
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.get(i, j);
            }
        }
        t
    }
}
