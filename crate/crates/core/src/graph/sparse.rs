//! Compressed sparse row storage and the sparse-dense product.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;

/// Minimum `nnz * num_cols` before `spmm` fans out across dense columns.
const PARALLEL_WORK_THRESHOLD: usize = 1 << 16;

/// CSR matrix with strictly increasing column indices per row and no stored
/// zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    num_rows: usize,
    num_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Validates raw CSR arrays.
    pub fn from_csr(
        num_rows: usize,
        num_cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_offsets.len() != num_rows + 1 || row_offsets[0] != 0 {
            return Err(Error::shape(
                "row_offsets must have num_rows + 1 entries starting at 0",
            ));
        }
        if row_offsets[num_rows] != values.len() || values.len() != col_indices.len() {
            return Err(Error::shape(
                "row_offsets, col_indices and values disagree on nnz",
            ));
        }
        for i in 0..num_rows {
            let (start, end) = (row_offsets[i], row_offsets[i + 1]);
            if start > end {
                return Err(Error::shape(format!("row_offsets decrease at row {i}")));
            }
            let cols = &col_indices[start..end];
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::shape(format!(
                    "row {i}: column indices not strictly increasing"
                )));
            }
            if cols.last().is_some_and(|&c| c >= num_cols) {
                return Err(Error::shape(format!("row {i}: column index out of range")));
            }
            if values[start..end].contains(&0.0) {
                return Err(Error::shape(format!("row {i}: explicit zero stored")));
            }
        }
        Ok(Self {
            num_rows,
            num_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Builds from `(row, col, value)` triplets; duplicates are summed and
    /// resulting zeros dropped.
    pub fn from_triplets(
        num_rows: usize,
        num_cols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
    ) -> Result<Self> {
        if let Some(&(r, c, _)) = triplets
            .iter()
            .find(|&&(r, c, _)| r >= num_rows || c >= num_cols)
        {
            return Err(Error::shape(format!(
                "triplet ({r}, {c}) outside {num_rows}x{num_cols}"
            )));
        }
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut row_offsets = vec![0usize; num_rows + 1];
        let mut col_indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut rows = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            if rows.last() == Some(&r) && col_indices.last() == Some(&c) {
                *values.last_mut().expect("non-empty") += v;
            } else {
                rows.push(r);
                col_indices.push(c);
                values.push(v);
            }
        }
        let mut keep_cols = Vec::with_capacity(col_indices.len());
        let mut keep_vals = Vec::with_capacity(values.len());
        for ((r, c), v) in rows.into_iter().zip(col_indices).zip(values) {
            if v != 0.0 {
                row_offsets[r + 1] += 1;
                keep_cols.push(c);
                keep_vals.push(v);
            }
        }
        for i in 0..num_rows {
            row_offsets[i + 1] += row_offsets[i];
        }
        Self::from_csr(num_rows, num_cols, row_offsets, keep_cols, keep_vals)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            num_rows: n,
            num_cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn zeros(num_rows: usize, num_cols: usize) -> Self {
        Self {
            num_rows,
            num_cols,
            row_offsets: vec![0; num_rows + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
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
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Iterates `(col, value)` over the stored entries of one row.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_offsets[i]..self.row_offsets[i + 1];
        self.col_indices[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    /// Entry lookup by binary search within the row.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_offsets[i]..self.row_offsets[i + 1];
        match self.col_indices[range.clone()].binary_search(&j) {
            Ok(pos) => self.values[range.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn is_symmetric(&self) -> bool {
        self.num_rows == self.num_cols
            && (0..self.num_rows).all(|i| self.row(i).all(|(j, v)| self.get(j, i) == v))
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.num_rows, self.num_cols);
        for i in 0..self.num_rows {
            for (j, v) in self.row(i) {
                out[(i, j)] = v;
            }
        }
        out
    }

    /// `out = self · x` for a single vector; rows summed in ascending column
    /// order.
    pub fn spmv_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.num_cols);
        debug_assert_eq!(out.len(), self.num_rows);
        for (i, o) in out.iter_mut().enumerate() {
            let (start, end) = (self.row_offsets[i], self.row_offsets[i + 1]);
            let mut acc = 0.0;
            for k in start..end {
                acc += self.values[k] * x[self.col_indices[k]];
            }
            *o = acc;
        }
    }

    /// Sparse-dense product `self · x`.
    ///
    /// Each output entry is accumulated over the row's stored entries in
    /// ascending column order, so the result is independent of how columns are
    /// scheduled across threads.
    pub fn spmm(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        if self.num_cols != x.num_rows() {
            return Err(Error::shape(format!(
                "spmm {}x{} by {}x{}",
                self.num_rows,
                self.num_cols,
                x.num_rows(),
                x.num_cols()
            )));
        }
        let mut out = DenseMatrix::zeros(self.num_rows, x.num_cols());
        if self.num_rows == 0 {
            return Ok(out);
        }
        let n = self.num_rows;
        if self.nnz() * x.num_cols() >= PARALLEL_WORK_THRESHOLD && x.num_cols() > 1 {
            out.as_mut_slice()
                .par_chunks_mut(n)
                .enumerate()
                .for_each(|(j, dst)| self.spmv_into(x.col(j), dst));
        } else {
            for (j, dst) in out.as_mut_slice().chunks_mut(n).enumerate() {
                self.spmv_into(x.col(j), dst);
            }
        }
        Ok(out)
    }
}

/// Free-function form of [`SparseMatrix::spmm`].
pub fn spmm(m: &SparseMatrix, x: &DenseMatrix) -> Result<DenseMatrix> {
    m.spmm(x)
}
