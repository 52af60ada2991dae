//! Compressed sparse column storage.
//!
//! Columns are samples, rows are features, so `Z` and `X` are stored one
//! sample per column and every product needed by the solver (`Zv`, `Zᵀv`,
//! `ZZᵀ`, `ZᵀZ`) is a single pass over the nonzeros.

use nalgebra::DMatrix;

use crate::error::{DwdError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SparseColMatrix {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseColMatrix {
    /// Builds a matrix from raw CSC arrays, checking every structural invariant.
    pub fn new(
        nrows: usize,
        ncols: usize,
        col_ptr: Vec<usize>,
        row_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if col_ptr.len() != ncols + 1 {
            return Err(DwdError::invalid(format!(
                "column pointer array has length {}, expected {}",
                col_ptr.len(),
                ncols + 1
            )));
        }
        if col_ptr[0] != 0 || col_ptr.windows(2).any(|w| w[0] > w[1]) {
            return Err(DwdError::invalid("column pointers must start at 0 and be nondecreasing"));
        }
        let nnz = col_ptr[ncols];
        if row_idx.len() != nnz || values.len() != nnz {
            return Err(DwdError::invalid(format!(
                "nnz mismatch: pointers say {nnz}, {} row indices, {} values",
                row_idx.len(),
                values.len()
            )));
        }
        for j in 0..ncols {
            let rows = &row_idx[col_ptr[j]..col_ptr[j + 1]];
            if rows.windows(2).any(|w| w[0] >= w[1]) {
                return Err(DwdError::invalid(format!(
                    "row indices of column {j} are not strictly increasing"
                )));
            }
            if let Some(&last) = rows.last() {
                if last >= nrows {
                    return Err(DwdError::invalid(format!(
                        "row index {last} out of range for {nrows} rows"
                    )));
                }
            }
        }
        Ok(Self {
            nrows,
            ncols,
            col_ptr,
            row_idx,
            values,
        })
    }

    /// Builds a matrix from per-column `(row, value)` lists. Rows must be
    /// strictly increasing within a column.
    pub fn from_columns(nrows: usize, columns: &[Vec<(usize, f64)>]) -> Result<Self> {
        let mut col_ptr = Vec::with_capacity(columns.len() + 1);
        col_ptr.push(0);
        let nnz = columns.iter().map(Vec::len).sum();
        let mut row_idx = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        for col in columns {
            for &(i, v) in col {
                row_idx.push(i);
                values.push(v);
            }
            col_ptr.push(row_idx.len());
        }
        Self::new(nrows, columns.len(), col_ptr, row_idx, values)
    }

    /// Converts a dense matrix, dropping exact zeros.
    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let mut col_ptr = vec![0];
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                let v = m[(i, j)];
                if v != 0.0 {
                    row_idx.push(i);
                    values.push(v);
                }
            }
            col_ptr.push(row_idx.len());
        }
        Self {
            nrows: m.nrows(),
            ncols: m.ncols(),
            col_ptr,
            row_idx,
            values,
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for j in 0..self.ncols {
            let (rows, vals) = self.col(j);
            for (&i, &v) in rows.iter().zip(vals) {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_indices(&self) -> &[usize] {
        &self.row_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Row indices and values of column `j`.
    pub fn col(&self, j: usize) -> (&[usize], &[f64]) {
        let range = self.col_ptr[j]..self.col_ptr[j + 1];
        (&self.row_idx[range.clone()], &self.values[range])
    }

    /// Dot product of column `j` with a dense vector of length `nrows`.
    pub fn col_dot(&self, j: usize, v: &[f64]) -> f64 {
        let (rows, vals) = self.col(j);
        rows.iter().zip(vals).map(|(&i, &x)| x * v[i]).sum()
    }

    pub fn col_norm_sq(&self, j: usize) -> f64 {
        self.col(j).1.iter().map(|v| v * v).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `out = M x` where `x` has length `ncols`.
    pub fn mul_vec_into(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(out.len(), self.nrows);
        out.iter_mut().for_each(|o| *o = 0.0);
        for (j, &xj) in x.iter().enumerate() {
            if xj == 0.0 {
                continue;
            }
            let (rows, vals) = self.col(j);
            for (&i, &v) in rows.iter().zip(vals) {
                out[i] += v * xj;
            }
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut out);
        out
    }

    /// `out = Mᵀ x` where `x` has length `nrows`.
    pub fn tr_mul_vec_into(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.nrows);
        assert_eq!(out.len(), self.ncols);
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.col_dot(j, x);
        }
    }

    pub fn tr_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.ncols];
        self.tr_mul_vec_into(x, &mut out);
        out
    }

    /// Multiplies column `j` by `s[j]`; the sparsity pattern is unchanged.
    pub fn scale_columns(&self, s: &[f64]) -> Self {
        assert_eq!(s.len(), self.ncols);
        let mut out = self.clone();
        for (j, &sj) in s.iter().enumerate() {
            for v in &mut out.values[self.col_ptr[j]..self.col_ptr[j + 1]] {
                *v *= sj;
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// Same entries with a larger row count.
    pub fn with_nrows(mut self, nrows: usize) -> Result<Self> {
        if nrows < self.nrows && self.row_idx.iter().any(|&i| i >= nrows) {
            return Err(DwdError::invalid(format!(
                "cannot shrink to {nrows} rows: entries exist beyond that index"
            )));
        }
        self.nrows = nrows;
        Ok(self)
    }

    /// Drops every entry in rows `>= nrows`.
    pub fn truncate_rows(&self, nrows: usize) -> Self {
        let mut col_ptr = vec![0];
        let mut row_idx = Vec::with_capacity(self.nnz());
        let mut values = Vec::with_capacity(self.nnz());
        for j in 0..self.ncols {
            let (rows, vals) = self.col(j);
            for (&i, &v) in rows.iter().zip(vals) {
                if i < nrows {
                    row_idx.push(i);
                    values.push(v);
                }
            }
            col_ptr.push(row_idx.len());
        }
        Self {
            nrows,
            ncols: self.ncols,
            col_ptr,
            row_idx,
            values,
        }
    }

    /// Keeps the listed columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Self {
        let mut col_ptr = vec![0];
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        for &j in cols {
            let (rows, vals) = self.col(j);
            row_idx.extend_from_slice(rows);
            values.extend_from_slice(vals);
            col_ptr.push(row_idx.len());
        }
        Self {
            nrows: self.nrows,
            ncols: cols.len(),
            col_ptr,
            row_idx,
            values,
        }
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.nrows + 1];
        for &i in &self.row_idx {
            counts[i + 1] += 1;
        }
        for i in 0..self.nrows {
            counts[i + 1] += counts[i];
        }
        let col_ptr = counts.clone();
        let mut next = counts;
        let mut row_idx = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for j in 0..self.ncols {
            let (rows, vals) = self.col(j);
            for (&i, &v) in rows.iter().zip(vals) {
                let slot = next[i];
                row_idx[slot] = j;
                values[slot] = v;
                next[i] += 1;
            }
        }
        Self {
            nrows: self.ncols,
            ncols: self.nrows,
            col_ptr,
            row_idx,
            values,
        }
    }

    /// Dense `M Mᵀ` (`nrows × nrows`), accumulated column by column.
    pub fn gram_rows(&self) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(self.nrows, self.nrows);
        for j in 0..self.ncols {
            let (rows, vals) = self.col(j);
            for (a, (&i, &vi)) in rows.iter().zip(vals).enumerate() {
                for (&k, &vk) in rows[a..].iter().zip(&vals[a..]) {
                    g[(i, k)] += vi * vk;
                }
            }
        }
        symmetrize_upper(&mut g);
        g
    }

    /// Dense `Mᵀ M` (`ncols × ncols`).
    pub fn gram_cols(&self) -> DMatrix<f64> {
        self.transpose().gram_rows()
    }
}

fn symmetrize_upper(g: &mut DMatrix<f64>) {
    let n = g.nrows();
    for i in 0..n {
        for k in (i + 1)..n {
            g[(k, i)] = g[(i, k)];
        }
    }
}
