//! Softmax and soft-target cross-entropy.

use crate::error::{GkdError, Result};
use crate::labels::LabelMatrix;
use crate::matrix::DenseMatrix;
use crate::scalar::Scalar;

/// Floor applied to probabilities before taking the log.
pub const LOG_CLAMP: f64 = 1e-12;

/// Row-wise softmax, stabilized by subtracting each row's maximum.
pub fn softmax_rows<T: Scalar>(logits: &DenseMatrix<T>) -> LabelMatrix<T> {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    LabelMatrix::from_matrix_unchecked(out)
}

/// Mean over masked rows of `-Σ_c target·ln(pred)`.
pub fn cross_entropy_soft<T: Scalar>(
    pred: &LabelMatrix<T>,
    target: &LabelMatrix<T>,
    row_mask: &[bool],
) -> Result<T> {
    if pred.as_matrix().shape() != target.as_matrix().shape() {
        return Err(GkdError::shape(format!(
            "prediction {:?} and target {:?} differ in shape",
            pred.as_matrix().shape(),
            target.as_matrix().shape()
        )));
    }
    if row_mask.len() != pred.rows() {
        return Err(GkdError::shape(format!(
            "row mask has {} entries for {} rows",
            row_mask.len(),
            pred.rows()
        )));
    }
    let clamp = T::of(LOG_CLAMP);
    let mut total = T::zero();
    let mut count = 0usize;
    for (i, _) in row_mask.iter().enumerate().filter(|(_, &m)| m) {
        count += 1;
        for (&p, &t) in pred.row(i).iter().zip(target.row(i)) {
            if t != T::zero() {
                total -= t * p.max(clamp).ln();
            }
        }
    }
    if count == 0 {
        return Err(GkdError::usage("cross-entropy mask selects no rows"));
    }
    Ok(total / T::of(count as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lm(rows: &[&[f64]]) -> LabelMatrix<f64> {
        LabelMatrix::new(DenseMatrix::from_rows(rows).unwrap()).unwrap()
    }

    #[test]
    fn softmax_examples() {
        let s = softmax_rows(&DenseMatrix::from_rows(&[[0.0, 0.0], [1000.0, 1000.0]]).unwrap());
        assert_eq!(s.row(0), &[0.5, 0.5]);
        assert_eq!(s.row(1), &[0.5, 0.5]);

        let s = softmax_rows(&DenseMatrix::from_rows(&[[2f64.ln(), 0.0]]).unwrap());
        assert!((s.row(0)[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((s.row(0)[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn cross_entropy_examples() {
        let u = lm(&[&[0.5, 0.5]]);
        let ce = cross_entropy_soft(&u, &u, &[true]).unwrap();
        assert!((ce - 2f64.ln()).abs() < 1e-15);

        let p = lm(&[&[1.0 - 1e-12, 1e-12]]);
        let t = lm(&[&[1.0, 0.0]]);
        assert!(cross_entropy_soft(&p, &t, &[true]).unwrap() < 1e-11);

        // 0.6·(−ln 0.75) + 0.4·(−ln 0.25)
        let expected = 0.6 * -(0.75f64.ln()) + 0.4 * -(0.25f64.ln());
        let ce = cross_entropy_soft(&lm(&[&[0.75, 0.25]]), &lm(&[&[0.6, 0.4]]), &[true]).unwrap();
        assert!((ce - expected).abs() < 1e-15);
        assert!((ce - 0.727).abs() < 5e-4);
    }

    #[test]
    fn empty_mask_is_a_usage_error() {
        let u = lm(&[&[0.5, 0.5]]);
        assert!(matches!(
            cross_entropy_soft(&u, &u, &[false]),
            Err(GkdError::Usage(_))
        ));
    }

    fn simplex_row(c: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.01f64..1.0, c).prop_map(|v| {
            let s: f64 = v.iter().sum();
            v.into_iter().map(|x| x / s).collect()
        })
    }

    proptest! {
        #[test]
        fn softmax_rows_sum_to_one(row in prop::collection::vec(-1000.0f64..1000.0, 1..8)) {
            let s = softmax_rows(&DenseMatrix::from_rows(&[row]).unwrap());
            let sum: f64 = s.row(0).iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-12);
            prop_assert!(s.row(0).iter().all(|&p| (0.0..=1.0).contains(&p)));
        }

        #[test]
        fn gibbs_inequality((p, q) in (2usize..6).prop_flat_map(|c| (simplex_row(c), simplex_row(c)))) {
            let pm = lm(&[&p]);
            let qm = lm(&[&q]);
            let entropy_q: f64 = q.iter().map(|&x| -x * x.ln()).sum();
            let entropy_p: f64 = p.iter().map(|&x| -x * x.ln()).sum();
            let self_ce = cross_entropy_soft(&pm, &pm, &[true]).unwrap();
            prop_assert!((self_ce - entropy_p).abs() < 1e-12);
            let ce = cross_entropy_soft(&pm, &qm, &[true]).unwrap();
            prop_assert!(ce >= entropy_q - 1e-12);
        }
    }
}
