//! Row-stochastic label matrices: hard one-hot targets, soft pseudo-labels, predictions.

use crate::error::{GkdError, Result};
use crate::matrix::DenseMatrix;
use crate::scalar::Scalar;

/// An `N x C` matrix whose rows lie on the probability simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMatrix<T>(DenseMatrix<T>);

impl<T: Scalar> LabelMatrix<T> {
    /// Validates that every row is non-negative and sums to one within `T::SIMPLEX_TOL`.
    pub fn new(m: DenseMatrix<T>) -> Result<Self> {
        for (i, row) in m.row_iter().enumerate() {
            check_simplex_row(i, row)?;
        }
        Ok(Self(m))
    }

    pub(crate) fn from_matrix_unchecked(m: DenseMatrix<T>) -> Self {
        Self(m)
    }

    pub fn one_hot(labels: &[usize], num_classes: usize) -> Result<Self> {
        let mut m = DenseMatrix::zeros(labels.len(), num_classes);
        for (i, &y) in labels.iter().enumerate() {
            if y >= num_classes {
                return Err(GkdError::Validation(format!(
                    "label {y} at row {i} is outside [0, {num_classes})"
                )));
            }
            m[(i, y)] = T::one();
        }
        Ok(Self(m))
    }

    pub fn uniform(rows: usize, num_classes: usize) -> Self {
        let p = T::one() / T::of(num_classes as f64);
        Self(DenseMatrix::filled(rows, num_classes, p))
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.0.rows()
    }

    #[inline]
    pub fn num_classes(&self) -> usize {
        self.0.cols()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        self.0.row(i)
    }

    #[inline]
    pub fn as_matrix(&self) -> &DenseMatrix<T> {
        &self.0
    }

    pub fn into_matrix(self) -> DenseMatrix<T> {
        self.0
    }

    pub fn argmax(&self) -> Vec<usize> {
        self.0.argmax_rows()
    }

    /// Most probable class of row `i`; ties go to the lowest index.
    pub fn argmax_row(&self, i: usize) -> usize {
        let row = self.row(i);
        let mut best = 0;
        for (c, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = c;
            }
        }
        best
    }

    pub fn select_rows(&self, indices: &[usize]) -> Self {
        Self(self.0.select_rows(indices))
    }

    /// Column `c`, e.g. the positive-class score vector for AUC.
    pub fn class_column(&self, c: usize) -> Vec<T> {
        self.0.row_iter().map(|r| r[c]).collect()
    }
}

pub(crate) fn check_simplex_row<T: Scalar>(i: usize, row: &[T]) -> Result<()> {
    let tol = T::of(T::SIMPLEX_TOL);
    let mut sum = T::zero();
    for &v in row {
        if !v.is_finite() || v < -tol {
            return Err(GkdError::Validation(format!(
                "row {i} has entry {v} outside the simplex"
            )));
        }
        sum += v;
    }
    if (sum - T::one()).abs() > tol {
        return Err(GkdError::Validation(format!(
            "row {i} sums to {sum}, not 1"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_off_simplex_rows() {
        let bad = DenseMatrix::from_rows(&[[0.7, 0.7]]).unwrap();
        assert!(matches!(LabelMatrix::<f64>::new(bad), Err(GkdError::Validation(_))));
        let neg = DenseMatrix::from_rows(&[[1.5, -0.5]]).unwrap();
        assert!(LabelMatrix::<f64>::new(neg).is_err());
    }

    #[test]
    fn one_hot_rows() {
        let y = LabelMatrix::<f64>::one_hot(&[1, 0, 2], 3).unwrap();
        assert_eq!(y.row(0), &[0.0, 1.0, 0.0]);
        assert_eq!(y.argmax(), vec![1, 0, 2]);
        assert!(LabelMatrix::<f64>::one_hot(&[3], 3).is_err());
    }
}
