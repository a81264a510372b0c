//! Compressed sparse row matrix used for propagation operators.

use crate::error::{GkdError, Result};
use crate::matrix::DenseMatrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> CsrMatrix<T> {
    /// Builds from per-row `(column, value)` lists. Columns must be sorted and unique per row.
    pub fn from_rows(n_cols: usize, rows: Vec<Vec<(usize, T)>>) -> Result<Self> {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let nnz = rows.iter().map(Vec::len).sum();
        let mut col_idx = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for (r, row) in rows.iter().enumerate() {
            for (k, &(c, v)) in row.iter().enumerate() {
                if c >= n_cols {
                    return Err(GkdError::shape(format!(
                        "row {r} references column {c} of a {n_cols}-column matrix"
                    )));
                }
                if k > 0 && row[k - 1].0 >= c {
                    return Err(GkdError::shape(format!(
                        "row {r} columns are not strictly increasing"
                    )));
                }
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            n_rows: rows.len(),
            n_cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(column, value)` pairs stored in row `r`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.row(r)
            .find(|&(col, _)| col == c)
            .map_or(T::zero(), |(_, v)| v)
    }

    pub fn row_sums(&self) -> Vec<T> {
        (0..self.n_rows)
            .map(|r| self.row(r).fold(T::zero(), |acc, (_, v)| acc + v))
            .collect()
    }

    /// Sparse-times-dense product `self · rhs`.
    pub fn mul_dense(&self, rhs: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        if self.n_cols != rhs.rows() {
            return Err(GkdError::shape(format!(
                "cannot multiply sparse {}x{} by {}x{}",
                self.n_rows,
                self.n_cols,
                rhs.rows(),
                rhs.cols()
            )));
        }
        let mut out = DenseMatrix::zeros(self.n_rows, rhs.cols());
        for r in 0..self.n_rows {
            let out_row = out.row_mut(r);
            for (c, w) in self.row(r) {
                for (o, &x) in out_row.iter_mut().zip(rhs.row(c)) {
                    *o += w * x;
                }
            }
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> DenseMatrix<T> {
        let mut out = DenseMatrix::zeros(self.n_rows, self.n_cols);
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                out[(r, c)] = v;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spmm_matches_dense_product() {
        let sp = CsrMatrix::from_rows(3, vec![vec![(0, 1.0), (2, 2.0)], vec![], vec![(1, -1.0)]])
            .unwrap();
        let x = DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]).unwrap();
        let expected = sp.to_dense().matmul(&x).unwrap();
        assert_eq!(sp.mul_dense(&x).unwrap(), expected);
        assert_eq!(sp.get(0, 2), 2.0);
        assert_eq!(sp.get(1, 1), 0.0);
        assert_eq!(sp.nnz(), 3);
    }

    #[test]
    fn rejects_unsorted_columns() {
        assert!(CsrMatrix::<f64>::from_rows(3, vec![vec![(2, 1.0), (0, 1.0)]]).is_err());
        assert!(CsrMatrix::<f64>::from_rows(2, vec![vec![(2, 1.0)]]).is_err());
    }
}
