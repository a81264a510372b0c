//! Teacher → pseudo-labels → propagation → student.

use crate::data::{Dataset, Splits};
use crate::error::{GkdError, Result};
use crate::graph::{row_normalize, SparseGraph};
use crate::labels::LabelMatrix;
use crate::lpa::{propagate, LpaConfig};
use crate::matrix::DenseMatrix;
use crate::nn::{mlp_predict, train_mlp, MlpParams, TrainConfig};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct GkdModel<T> {
    pub teacher: MlpParams<T>,
    pub student: MlpParams<T>,
    pub lpa: LpaConfig,
    /// Propagated teacher labels over the training nodes, in training-split order.
    pub soft_labels: LabelMatrix<T>,
}

pub(crate) fn require_every_class(labels: &[usize], num_classes: usize) -> Result<()> {
    let mut seen = vec![false; num_classes];
    for &y in labels {
        seen[y] = true;
    }
    if let Some(c) = seen.iter().position(|s| !s) {
        return Err(GkdError::usage(format!("class {c} has no labeled rows")));
    }
    Ok(())
}

/// Feature-only network fit to the labeled rows.
pub fn train_teacher<T: Scalar>(
    x: &DenseMatrix<T>,
    y_labeled: &LabelMatrix<T>,
    labeled_mask: &[bool],
    cfg: &TrainConfig,
) -> Result<MlpParams<T>> {
    if labeled_mask.len() != y_labeled.rows() {
        return Err(GkdError::shape("labeled mask and label matrix differ in length"));
    }
    let labeled: Vec<usize> = (0..y_labeled.rows())
        .filter(|&i| labeled_mask[i])
        .map(|i| y_labeled.argmax_row(i))
        .collect();
    require_every_class(&labeled, y_labeled.num_classes())?;
    train_mlp(x, y_labeled, labeled_mask, cfg)
}

/// Ground truth on labeled rows, teacher softmax elsewhere.
pub fn pseudo_label<T: Scalar>(
    teacher: &MlpParams<T>,
    x: &DenseMatrix<T>,
    y_labeled: &LabelMatrix<T>,
    labeled_mask: &[bool],
) -> Result<LabelMatrix<T>> {
    if y_labeled.rows() != x.rows() || labeled_mask.len() != x.rows() {
        return Err(GkdError::shape(format!(
            "{} feature rows, {} label rows, {} mask entries",
            x.rows(),
            y_labeled.rows(),
            labeled_mask.len()
        )));
    }
    let mut out = mlp_predict(teacher, x)?.into_matrix();
    if out.cols() != y_labeled.num_classes() {
        return Err(GkdError::shape("teacher output width differs from class count"));
    }
    for i in (0..x.rows()).filter(|&i| labeled_mask[i]) {
        out.row_mut(i).copy_from_slice(y_labeled.row(i));
    }
    Ok(LabelMatrix::from_matrix_unchecked(out))
}

/// Trains the full model on the training split only.
///
/// `graph` must span exactly the training nodes, numbered in `splits.train` order.
/// Validation and test rows are never read.
pub fn gkd_train<T: Scalar>(
    ds: &Dataset<T>,
    splits: &Splits,
    graph: &SparseGraph,
    teacher_cfg: &TrainConfig,
    lpa_cfg: &LpaConfig,
    student_cfg: &TrainConfig,
) -> Result<GkdModel<T>> {
    check_graph(graph, splits)?;
    lpa_cfg.validate()?;
    let x = ds.features.select_rows(&splits.train);
    let y = LabelMatrix::one_hot(&ds.labels_at(&splits.train), ds.num_classes)?;
    let teacher = train_teacher(&x, &y, &splits.labeled_within_train(), teacher_cfg)?;
    let soft_labels = propagated_labels(ds, splits, graph, &teacher, lpa_cfg)?;
    let student = train_student(ds, splits, &soft_labels, student_cfg)?;
    Ok(GkdModel {
        teacher,
        student,
        lpa: lpa_cfg.clone(),
        soft_labels,
    })
}

fn check_graph(graph: &SparseGraph, splits: &Splits) -> Result<()> {
    if graph.n() != splits.train.len() {
        return Err(GkdError::usage(format!(
            "graph has {} nodes but the training split has {}",
            graph.n(),
            splits.train.len()
        )));
    }
    Ok(())
}

/// Pseudo-labels of a trained teacher, propagated over the training-node graph.
pub fn propagated_labels<T: Scalar>(
    ds: &Dataset<T>,
    splits: &Splits,
    graph: &SparseGraph,
    teacher: &MlpParams<T>,
    lpa_cfg: &LpaConfig,
) -> Result<LabelMatrix<T>> {
    check_graph(graph, splits)?;
    let x = ds.features.select_rows(&splits.train);
    let y = LabelMatrix::one_hot(&ds.labels_at(&splits.train), ds.num_classes)?;
    let labeled = splits.labeled_within_train();
    let y0 = pseudo_label(teacher, &x, &y, &labeled)?;
    let propagated = propagate(&row_normalize(graph), &y0, &y, &labeled, lpa_cfg)?;
    if !propagated.converged {
        log::debug!(
            "propagation stopped after {} iterations without reaching tolerance",
            propagated.iterations
        );
    }
    Ok(propagated.labels)
}

/// Fits the student to `soft_labels` on every training row.
pub fn train_student<T: Scalar>(
    ds: &Dataset<T>,
    splits: &Splits,
    soft_labels: &LabelMatrix<T>,
    cfg: &TrainConfig,
) -> Result<MlpParams<T>> {
    let x = ds.features.select_rows(&splits.train);
    train_mlp(&x, soft_labels, &vec![true; x.rows()], cfg)
}

/// Graph-free inference through the student network.
pub fn predict<T: Scalar>(model: &GkdModel<T>, x: &DenseMatrix<T>) -> Result<LabelMatrix<T>> {
    mlp_predict(&model.student, x)
}
