//! Column-major dense matrices.
//!
//! Feature matrices, transformed features and propagated representations are
//! all stored here. Columns are contiguous, so per-column kernels (sparse
//! products, CG solves) work on plain slices.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    num_rows: usize,
    num_cols: usize,
    values: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(num_rows: usize, num_cols: usize) -> Self {
        Self {
            num_rows,
            num_cols,
            values: vec![0.0; num_rows * num_cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn filled(num_rows: usize, num_cols: usize, value: f64) -> Self {
        Self {
            num_rows,
            num_cols,
            values: vec![value; num_rows * num_cols],
        }
    }

    /// Builds a matrix from column-major storage.
    pub fn from_col_major(num_rows: usize, num_cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != num_rows * num_cols {
            return Err(Error::shape(format!(
                "{} values cannot fill a {num_rows}x{num_cols} matrix",
                values.len()
            )));
        }
        Ok(Self {
            num_rows,
            num_cols,
            values,
        })
    }

    /// Builds a matrix from a slice of equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let num_rows = rows.len();
        let num_cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut m = Self::zeros(num_rows, num_cols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != num_cols {
                return Err(Error::shape(format!(
                    "row {i} has {} entries, expected {num_cols}",
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        Ok(m)
    }

    pub fn from_fn(
        num_rows: usize,
        num_cols: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Self {
        let mut m = Self::zeros(num_rows, num_cols);
        for j in 0..num_cols {
            for i in 0..num_rows {
                m.values[j * num_rows + i] = f(i, j);
            }
        }
        m
    }

    /// Single column from a vector.
    pub fn column_vector(values: Vec<f64>) -> Self {
        Self {
            num_rows: values.len(),
            num_cols: 1,
            values,
        }
    }

    #[inline]
    pub fn num_rows(&self) -> usize {
        self.num_rows
    }

    #[inline]
    pub fn num_cols(&self) -> usize {
        self.num_cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.num_rows, self.num_cols)
    }

    /// Column-major backing storage.
    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.values[j * self.num_rows..(j + 1) * self.num_rows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.values[j * self.num_rows..(j + 1) * self.num_rows]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.num_cols).map(move |j| self.col(j))
    }

    pub fn columns_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        let n = self.num_cols;
        self.values.chunks_exact_mut(self.num_rows.max(1)).take(n)
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.num_cols).map(|j| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.num_cols, self.num_rows, |i, j| self[(j, i)])
    }

    /// Selects the given rows, in order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self::from_fn(rows.len(), self.num_cols, |i, j| self[(rows[i], j)])
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Frobenius inner product `tr(selfᵀ other)`.
    pub fn dot(&self, other: &Self) -> Result<f64> {
        self.check_same_shape(other, "dot")?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum())
    }

    pub fn scale(&mut self, factor: f64) {
        self.values.iter_mut().for_each(|v| *v *= factor);
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.scale(factor);
        out
    }

    /// `self += factor * other`.
    pub fn axpy(&mut self, factor: f64, other: &Self) -> Result<()> {
        self.check_same_shape(other, "axpy")?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += factor * b;
        }
        Ok(())
    }

    /// `a * self + b * other` as a new matrix.
    pub fn lin_comb(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        self.check_same_shape(other, "lin_comb")?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(Self {
            num_rows: self.num_rows,
            num_cols: self.num_cols,
            values,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.lin_comb(1.0, other, -1.0)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.lin_comb(1.0, other, 1.0)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            num_rows: self.num_rows,
            num_cols: self.num_cols,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `self · rhs`.
    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.num_cols != rhs.num_rows {
            return Err(Error::shape(format!(
                "matmul {}x{} by {}x{}",
                self.num_rows, self.num_cols, rhs.num_rows, rhs.num_cols
            )));
        }
        let mut out = Self::zeros(self.num_rows, rhs.num_cols);
        for j in 0..rhs.num_cols {
            let dst = &mut out.values[j * self.num_rows..(j + 1) * self.num_rows];
            for (k, &b) in rhs.col(j).iter().enumerate() {
                if b == 0.0 {
                    continue;
                }
                for (d, a) in dst.iter_mut().zip(self.col(k)) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · rhs` without materializing the transpose.
    pub fn t_matmul(&self, rhs: &Self) -> Result<Self> {
        if self.num_rows != rhs.num_rows {
            return Err(Error::shape(format!(
                "t_matmul {}x{} (transposed) by {}x{}",
                self.num_rows, self.num_cols, rhs.num_rows, rhs.num_cols
            )));
        }
        Ok(Self::from_fn(self.num_cols, rhs.num_cols, |i, j| {
            self.col(i).iter().zip(rhs.col(j)).map(|(a, b)| a * b).sum()
        }))
    }

    /// `self · rhsᵀ`.
    pub fn matmul_t(&self, rhs: &Self) -> Result<Self> {
        if self.num_cols != rhs.num_cols {
            return Err(Error::shape(format!(
                "matmul_t {}x{} by {}x{} (transposed)",
                self.num_rows, self.num_cols, rhs.num_rows, rhs.num_cols
            )));
        }
        let mut out = Self::zeros(self.num_rows, rhs.num_rows);
        for k in 0..self.num_cols {
            let a_col = self.col(k);
            let b_col = rhs.col(k);
            for (j, &b) in b_col.iter().enumerate() {
                if b == 0.0 {
                    continue;
                }
                let dst = &mut out.values[j * self.num_rows..(j + 1) * self.num_rows];
                for (d, a) in dst.iter_mut().zip(a_col) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Maximum absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.check_same_shape(other, "max_abs_diff")?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// `‖self − reference‖_F / ‖reference‖_F`, or the absolute norm when the
    /// reference is zero.
    pub fn relative_error(&self, reference: &Self) -> Result<f64> {
        let diff = self.sub(reference)?.frobenius_norm();
        let denom = reference.frobenius_norm();
        Ok(if denom == 0.0 { diff } else { diff / denom })
    }

    fn check_same_shape(&self, other: &Self, op: &str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::shape(format!(
                "{op}: {}x{} vs {}x{}",
                self.num_rows, self.num_cols, other.num_rows, other.num_cols
            )));
        }
        Ok(())
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.num_rows && j < self.num_cols);
        &self.values[j * self.num_rows + i]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.num_rows && j < self.num_cols);
        &mut self.values[j * self.num_rows + i]
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.num_rows, self.num_cols)?;
        for i in 0..self.num_rows.min(12) {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        if self.num_rows > 12 {
            writeln!(f, "  ...")?;
        }
        write!(f, "]")
    }
}
