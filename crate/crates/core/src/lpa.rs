//! Label propagation with a remembrance term and labeled-node clamping.
//!
//! Each iteration computes
//!
//! ```text
//! Y(k) = (1 - α) · P · Y(k-1) + α · Y(0)
//! Y(k)[labeled] = Y_L
//! ```
//!
//! where `P = D⁻¹A` is row-stochastic. `Y(0)` holds the ground truth on labeled
//! rows and the feature network's soft predictions elsewhere. For `α > 0` the
//! recurrence is a contraction, so it converges to a unique fixed point.

use serde::{Deserialize, Serialize};

use crate::error::{GkdError, Result};
use crate::graph::PropagationOperator;
use crate::labels::LabelMatrix;
use crate::matrix::DenseMatrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LpaConfig {
    /// Weight of the remembrance term, in (0, 1].
    pub alpha: f64,
    pub max_iterations: usize,
    /// Stop once the largest absolute entry change drops below this.
    pub tolerance: f64,
}

impl Default for LpaConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            max_iterations: 100,
            tolerance: 1e-6,
        }
    }
}

impl LpaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(GkdError::usage(format!(
                "alpha must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        if self.max_iterations == 0 {
            return Err(GkdError::usage("max_iterations must be at least 1"));
        }
        if !(self.tolerance > 0.0) {
            return Err(GkdError::usage("tolerance must be positive"));
        }
        Ok(())
    }

    pub fn with_alpha(&self, alpha: f64) -> Self {
        Self {
            alpha,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone)]
pub struct Propagation<T> {
    pub labels: LabelMatrix<T>,
    pub iterations: usize,
    pub converged: bool,
    /// Largest absolute entry change at each iteration.
    pub changes: Vec<T>,
}

fn check_inputs<T: Scalar>(
    n: usize,
    y0: &LabelMatrix<T>,
    y_labeled: &LabelMatrix<T>,
    labeled_mask: &[bool],
) -> Result<()> {
    if y0.rows() != n || y_labeled.rows() != n || labeled_mask.len() != n {
        return Err(GkdError::shape(format!(
            "operator over {n} nodes, Y0 has {} rows, Y_L has {} rows, mask has {} entries",
            y0.rows(),
            y_labeled.rows(),
            labeled_mask.len()
        )));
    }
    if y0.num_classes() != y_labeled.num_classes() {
        return Err(GkdError::shape("Y0 and Y_L differ in class count"));
    }
    // LabelMatrix may have been built unchecked upstream.
    for i in 0..n {
        crate::labels::check_simplex_row(i, y0.row(i))?;
        if labeled_mask[i] && y0.row(i) != y_labeled.row(i) {
            return Err(GkdError::Validation(format!(
                "labeled row {i} of Y0 differs from Y_L"
            )));
        }
    }
    Ok(())
}

/// Iterates the clamped recurrence to convergence or `max_iterations`.
///
/// `y_labeled` has one row per node; only rows selected by `labeled_mask` are read.
pub fn propagate<T: Scalar>(
    op: &PropagationOperator<T>,
    y0: &LabelMatrix<T>,
    y_labeled: &LabelMatrix<T>,
    labeled_mask: &[bool],
    cfg: &LpaConfig,
) -> Result<Propagation<T>> {
    cfg.validate()?;
    let n = op.n();
    check_inputs(n, y0, y_labeled, labeled_mask)?;

    let decay = T::one() - T::of(cfg.alpha);
    let tol = T::of(cfg.tolerance);
    let start = y0.as_matrix();
    let mut current = start.clone();
    let mut changes = Vec::new();
    let mut converged = false;

    for _ in 0..cfg.max_iterations {
        let spread = op.apply(&current)?;
        let mut next = DenseMatrix::zeros(n, start.cols());
        for i in 0..n {
            let out = next.row_mut(i);
            if labeled_mask[i] {
                out.copy_from_slice(y_labeled.row(i));
                continue;
            }
            // Y0 + (1-α)(PY - Y0): exact when α = 1 or when PY = Y0.
            for ((o, &s), &y) in out.iter_mut().zip(spread.row(i)).zip(start.row(i)) {
                *o = y + decay * (s - y);
            }
        }
        let change = next.max_abs_diff(&current);
        changes.push(change);
        current = next;
        if change < tol {
            converged = true;
            break;
        }
    }

    Ok(Propagation {
        labels: LabelMatrix::from_matrix_unchecked(current),
        iterations: changes.len(),
        converged,
        changes,
    })
}

/// Largest node count the dense oracle accepts.
pub const ORACLE_MAX_NODES: usize = 200;

/// Exact fixed point of the clamped recurrence by a dense solve on the unlabeled block:
/// `(I - (1-α) P_UU) Y_U = (1-α) P_UL Y_L + α Y0_U`.
pub fn lpa_fixed_point_oracle<T: Scalar>(
    op: &PropagationOperator<T>,
    y0: &LabelMatrix<T>,
    y_labeled: &LabelMatrix<T>,
    labeled_mask: &[bool],
    alpha: f64,
) -> Result<LabelMatrix<T>> {
    LpaConfig::default().with_alpha(alpha).validate()?;
    let n = op.n();
    if n > ORACLE_MAX_NODES {
        return Err(GkdError::usage(format!(
            "dense oracle limited to {ORACLE_MAX_NODES} nodes, got {n}"
        )));
    }
    check_inputs(n, y0, y_labeled, labeled_mask)?;

    let c = y0.num_classes();
    let decay = T::one() - T::of(alpha);
    let alpha = T::of(alpha);
    let p = op.matrix().to_dense();
    let unlabeled: Vec<usize> = (0..n).filter(|&i| !labeled_mask[i]).collect();
    let u = unlabeled.len();

    let mut lhs = DenseMatrix::zeros(u, u);
    let mut rhs = DenseMatrix::zeros(u, c);
    for (a, &i) in unlabeled.iter().enumerate() {
        for (b, &j) in unlabeled.iter().enumerate() {
            lhs[(a, b)] = if a == b { T::one() } else { T::zero() } - decay * p[(i, j)];
        }
        for k in 0..c {
            let mut acc = alpha * y0.row(i)[k];
            for j in (0..n).filter(|&j| labeled_mask[j]) {
                acc += decay * p[(i, j)] * y_labeled.row(j)[k];
            }
            rhs[(a, k)] = acc;
        }
    }
    let solved = solve_dense(lhs, rhs)?;

    let mut out = DenseMatrix::zeros(n, c);
    for i in (0..n).filter(|&i| labeled_mask[i]) {
        out.row_mut(i).copy_from_slice(y_labeled.row(i));
    }
    for (a, &i) in unlabeled.iter().enumerate() {
        out.row_mut(i).copy_from_slice(solved.row(a));
    }
    Ok(LabelMatrix::from_matrix_unchecked(out))
}

/// Gaussian elimination with partial pivoting for `A X = B`.
fn solve_dense<T: Scalar>(mut a: DenseMatrix<T>, mut b: DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    let n = a.rows();
    let m = b.cols();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| {
                a[(x, col)]
                    .abs()
                    .partial_cmp(&a[(y, col)].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .expect("non-empty range");
        if !(a[(pivot, col)].abs() > T::epsilon()) {
            return Err(GkdError::Numerical(format!(
                "singular propagation system at column {col}"
            )));
        }
        if pivot != col {
            for k in 0..n {
                let tmp = a[(col, k)];
                a[(col, k)] = a[(pivot, k)];
                a[(pivot, k)] = tmp;
            }
            for k in 0..m {
                let tmp = b[(col, k)];
                b[(col, k)] = b[(pivot, k)];
                b[(pivot, k)] = tmp;
            }
        }
        let d = a[(col, col)];
        for r in col + 1..n {
            let f = a[(r, col)] / d;
            if f == T::zero() {
                continue;
            }
            for k in col..n {
                let v = a[(col, k)];
                a[(r, k)] -= f * v;
            }
            for k in 0..m {
                let v = b[(col, k)];
                b[(r, k)] -= f * v;
            }
        }
    }
    let mut x = DenseMatrix::zeros(n, m);
    for r in (0..n).rev() {
        for k in 0..m {
            let mut acc = b[(r, k)];
            for j in r + 1..n {
                acc -= a[(r, j)] * x[(j, k)];
            }
            x[(r, k)] = acc / a[(r, r)];
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{row_normalize, SparseGraph};

    fn lm(rows: &[&[f64]]) -> LabelMatrix<f64> {
        LabelMatrix::new(DenseMatrix::from_rows(rows).unwrap()).unwrap()
    }

    fn two_node() -> (PropagationOperator<f64>, LabelMatrix<f64>, LabelMatrix<f64>, Vec<bool>) {
        let g = SparseGraph::from_edges(2, [(0, 1)]).unwrap();
        let y0 = lm(&[&[1.0, 0.0], &[0.5, 0.5]]);
        let yl = lm(&[&[1.0, 0.0], &[0.0, 1.0]]);
        (row_normalize(&g), y0, yl, vec![true, false])
    }

    #[test]
    fn two_node_fixed_point() {
        let (op, y0, yl, mask) = two_node();
        let cfg = LpaConfig {
            alpha: 0.5,
            max_iterations: 200,
            tolerance: 1e-14,
        };
        let out = propagate(&op, &y0, &yl, &mask, &cfg).unwrap();
        assert!(out.converged);
        assert!((out.labels.row(1)[0] - 0.75).abs() < 1e-12);
        assert!((out.labels.row(1)[1] - 0.25).abs() < 1e-12);
        assert_eq!(out.labels.row(0), &[1.0, 0.0]);

        let exact = lpa_fixed_point_oracle(&op, &y0, &yl, &mask, 0.5).unwrap();
        assert!((exact.row(1)[0] - 0.75).abs() < 1e-15);
        assert!((exact.row(1)[1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn alpha_one_returns_initial_labels() {
        let g = SparseGraph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
        let y0 = lm(&[&[0.2, 0.8], &[0.6, 0.4], &[0.3, 0.7]]);
        let cfg = LpaConfig {
            alpha: 1.0,
            ..LpaConfig::default()
        };
        let out = propagate(&row_normalize(&g), &y0, &y0, &[false; 3], &cfg).unwrap();
        assert_eq!(out.labels, y0);
        assert_eq!(out.iterations, 1);

        let exact = lpa_fixed_point_oracle(&row_normalize(&g), &y0, &y0, &[false; 3], 1.0).unwrap();
        assert_eq!(exact, y0);
    }

    #[test]
    fn all_labeled_oracle_returns_labels() {
        let (op, _, yl, _) = two_node();
        let exact = lpa_fixed_point_oracle(&op, &yl, &yl, &[true, true], 0.3).unwrap();
        assert_eq!(exact, yl);
    }

    #[test]
    fn isolated_unlabeled_node_keeps_its_prediction() {
        let g = SparseGraph::from_edges(3, [(0, 1)]).unwrap();
        let y0 = lm(&[&[1.0, 0.0], &[0.4, 0.6], &[0.15, 0.85]]);
        let out = propagate(&row_normalize(&g), &y0, &y0, &[true, false, false], &LpaConfig::default()).unwrap();
        assert_eq!(out.labels.row(2), &[0.15, 0.85]);
    }

    #[test]
    fn rejects_bad_inputs() {
        let (op, y0, yl, mask) = two_node();
        let bad_alpha = LpaConfig {
            alpha: 0.0,
            ..LpaConfig::default()
        };
        assert!(matches!(propagate(&op, &y0, &yl, &mask, &bad_alpha), Err(GkdError::Usage(_))));

        let off_simplex = LabelMatrix::from_matrix_unchecked(
            DenseMatrix::from_rows(&[[1.0, 0.0], [0.9, 0.9]]).unwrap(),
        );
        assert!(matches!(
            propagate(&op, &off_simplex, &yl, &mask, &LpaConfig::default()),
            Err(GkdError::Validation(_))
        ));

        let mismatched = lm(&[&[0.0, 1.0], &[0.5, 0.5]]);
        assert!(propagate(&op, &mismatched, &yl, &mask, &LpaConfig::default()).is_err());
    }
}
