//! Two-layer GCN baseline: `softmax(Â · ReLU(Â · X · W1) · W2)`.
//!
//! Trained transductively over the training-node graph. Unseen nodes arrive
//! without edges, so their row of `Â` is the bare self-loop (weight 1) and the
//! network collapses to `ReLU(x · W1) · W2`.

use crate::data::{Dataset, Splits};
use crate::error::{GkdError, Result};
use crate::graph::{sym_normalize, SparseGraph};
use crate::labels::LabelMatrix;
use crate::matrix::DenseMatrix;
use crate::nn::adam::{adam_step, AdamState, Parameters};
use crate::nn::mlp::{apply_scale, dropout_scale, relu_inplace, softmax_ce_logit_grad, DenseLayer};
use crate::nn::{cross_entropy_soft, softmax_rows, Mode, TrainConfig};
use crate::pipeline::gkd::require_every_class;
use crate::rng::seeded;
use crate::scalar::Scalar;
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct GcnParams<T> {
    /// `F x H`
    pub w1: DenseMatrix<T>,
    /// `H x C`
    pub w2: DenseMatrix<T>,
}

impl<T: Scalar> Parameters<T> for GcnParams<T> {
    fn buffers(&self) -> Vec<&[T]> {
        vec![self.w1.as_slice(), self.w2.as_slice()]
    }

    fn buffers_mut(&mut self) -> Vec<&mut [T]> {
        vec![self.w1.as_mut_slice(), self.w2.as_mut_slice()]
    }
}

impl<T: Scalar> GcnParams<T> {
    pub fn new(w1: DenseMatrix<T>, w2: DenseMatrix<T>) -> Result<Self> {
        if w1.cols() != w2.rows() {
            return Err(GkdError::shape(format!(
                "W1 is {}x{} but W2 is {}x{}",
                w1.rows(),
                w1.cols(),
                w2.rows(),
                w2.cols()
            )));
        }
        Ok(Self { w1, w2 })
    }

    pub fn init(in_dim: usize, hidden: usize, out_dim: usize, seed: u64) -> Self {
        let mut rng = seeded(seed);
        Self {
            w1: DenseLayer::<T>::init(in_dim, hidden, &mut rng).weight,
            w2: DenseLayer::<T>::init(hidden, out_dim, &mut rng).weight,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.rows()
    }
}

struct GcnCache<T> {
    ax: DenseMatrix<T>,
    pre: DenseMatrix<T>,
    scale: Option<Vec<T>>,
    ah: DenseMatrix<T>,
    logits: DenseMatrix<T>,
}

fn forward_cached<T: Scalar>(
    params: &GcnParams<T>,
    adj: &CsrMatrix<T>,
    ax: DenseMatrix<T>,
    mode: Mode,
) -> Result<GcnCache<T>> {
    let pre = ax.matmul(&params.w1)?;
    let mut h = pre.clone();
    relu_inplace(&mut h);
    let scale = dropout_scale(h.rows(), h.cols(), mode, 0);
    apply_scale(&mut h, &scale);
    let ah = adj.mul_dense(&h)?;
    let logits = ah.matmul(&params.w2)?;
    Ok(GcnCache {
        ax,
        pre,
        scale,
        ah,
        logits,
    })
}

pub fn gcn_forward<T: Scalar>(
    params: &GcnParams<T>,
    adj: &CsrMatrix<T>,
    x: &DenseMatrix<T>,
    mode: Mode,
) -> Result<DenseMatrix<T>> {
    check_dims(params, adj, x)?;
    Ok(forward_cached(params, adj, adj.mul_dense(x)?, mode)?.logits)
}

fn check_dims<T: Scalar>(params: &GcnParams<T>, adj: &CsrMatrix<T>, x: &DenseMatrix<T>) -> Result<()> {
    if adj.n_rows() != x.rows() || adj.n_cols() != x.rows() {
        return Err(GkdError::shape(format!(
            "adjacency is {}x{} for {} nodes",
            adj.n_rows(),
            adj.n_cols(),
            x.rows()
        )));
    }
    if x.cols() != params.input_dim() {
        return Err(GkdError::shape(format!(
            "nodes have {} features, GCN expects {}",
            x.cols(),
            params.input_dim()
        )));
    }
    Ok(())
}

/// Masked soft cross-entropy and its gradient. `adj` must be symmetric.
pub fn gcn_backward<T: Scalar>(
    params: &GcnParams<T>,
    adj: &CsrMatrix<T>,
    x: &DenseMatrix<T>,
    target: &LabelMatrix<T>,
    row_mask: &[bool],
    mode: Mode,
) -> Result<(T, GcnParams<T>)> {
    check_dims(params, adj, x)?;
    gcn_backward_with_ax(params, adj, adj.mul_dense(x)?, target, row_mask, mode)
}

fn gcn_backward_with_ax<T: Scalar>(
    params: &GcnParams<T>,
    adj: &CsrMatrix<T>,
    ax: DenseMatrix<T>,
    target: &LabelMatrix<T>,
    row_mask: &[bool],
    mode: Mode,
) -> Result<(T, GcnParams<T>)> {
    let cache = forward_cached(params, adj, ax, mode)?;
    let probs = softmax_rows(&cache.logits);
    let loss = cross_entropy_soft(&probs, target, row_mask)?;
    let d_logits = softmax_ce_logit_grad(&probs, target, row_mask)?;
    let w2 = cache.ah.t_matmul(&d_logits)?;
    let d_ah = d_logits.matmul_t(&params.w2)?;
    let mut d_h = adj.mul_dense(&d_ah)?;
    apply_scale(&mut d_h, &cache.scale);
    for (d, &z) in d_h.as_mut_slice().iter_mut().zip(cache.pre.as_slice()) {
        if z <= T::zero() {
            *d = T::zero();
        }
    }
    let w1 = cache.ax.t_matmul(&d_h)?;
    Ok((loss, GcnParams { w1, w2 }))
}

/// Predictions for nodes with no edges (self-loop only).
pub fn gcn_predict_isolated<T: Scalar>(params: &GcnParams<T>, x: &DenseMatrix<T>) -> Result<LabelMatrix<T>> {
    if x.cols() != params.input_dim() {
        return Err(GkdError::shape(format!(
            "nodes have {} features, GCN expects {}",
            x.cols(),
            params.input_dim()
        )));
    }
    let mut h = x.matmul(&params.w1)?;
    relu_inplace(&mut h);
    Ok(softmax_rows(&h.matmul(&params.w2)?))
}

/// Trains on the training-node graph with loss on labeled rows. Uses `cfg.hidden[0]` as width.
pub fn gcn_baseline<T: Scalar>(
    ds: &Dataset<T>,
    splits: &Splits,
    graph: &SparseGraph,
    cfg: &TrainConfig,
) -> Result<GcnParams<T>> {
    if graph.n() != splits.train.len() {
        return Err(GkdError::usage(format!(
            "graph has {} nodes but the training split has {}",
            graph.n(),
            splits.train.len()
        )));
    }
    let hidden = *cfg
        .hidden
        .first()
        .ok_or_else(|| GkdError::usage("GCN needs a hidden width"))?;
    require_every_class(&ds.labels_at(&splits.labeled), ds.num_classes)?;

    let x = ds.features.select_rows(&splits.train);
    let target = LabelMatrix::one_hot(&ds.labels_at(&splits.train), ds.num_classes)?;
    let mask = splits.labeled_within_train();
    let adj = sym_normalize::<T>(graph);
    let ax = adj.mul_dense(&x)?;

    let mut params = GcnParams::init(x.cols(), hidden, ds.num_classes, cfg.init_seed());
    let mut state = AdamState::new(&params);
    let lr = T::of(cfg.learning_rate);
    for epoch in 0..cfg.epochs {
        let (_, grads) = gcn_backward_with_ax(&params, &adj, ax.clone(), &target, &mask, cfg.epoch_mode(epoch))?;
        adam_step(&mut params, &grads, &mut state, lr)?;
    }
    Ok(params)
}
