//! Fully connected ReLU network with hand-derived backpropagation.
//!
//! Every hidden layer is `ReLU(a·W + b)` followed by inverted dropout in training
//! mode; the output layer emits raw logits. Gradients are for the composition
//! `cross_entropy_soft(softmax(logits), target)` averaged over the masked rows.

use rand::Rng;

use crate::error::{GkdError, Result};
use crate::labels::LabelMatrix;
use crate::matrix::DenseMatrix;
use crate::nn::adam::Parameters;
use crate::nn::loss::{cross_entropy_soft, softmax_rows};
use crate::rng::{derive_seed, seeded};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer<T> {
    /// `in_dim x out_dim`
    pub weight: DenseMatrix<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> DenseLayer<T> {
    pub fn new(weight: DenseMatrix<T>, bias: Vec<T>) -> Result<Self> {
        if bias.len() != weight.cols() {
            return Err(GkdError::shape(format!(
                "bias of length {} for a layer with {} outputs",
                bias.len(),
                weight.cols()
            )));
        }
        Ok(Self { weight, bias })
    }

    /// Uniform in ±sqrt(6 / (fan_in + fan_out)), zero bias.
    pub fn init(in_dim: usize, out_dim: usize, rng: &mut impl Rng) -> Self {
        let bound = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let data = (0..in_dim * out_dim)
            .map(|_| T::of(rng.random_range(-bound..bound)))
            .collect();
        Self {
            weight: DenseMatrix::from_vec(in_dim, out_dim, data).expect("sized buffer"),
            bias: vec![T::zero(); out_dim],
        }
    }

    #[inline]
    pub fn in_dim(&self) -> usize {
        self.weight.rows()
    }

    #[inline]
    pub fn out_dim(&self) -> usize {
        self.weight.cols()
    }

    pub(crate) fn zeros_like(&self) -> Self {
        Self {
            weight: DenseMatrix::zeros(self.in_dim(), self.out_dim()),
            bias: vec![T::zero(); self.out_dim()],
        }
    }

    /// `x·W + b`
    pub(crate) fn affine(&self, x: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        let mut z = x.matmul(&self.weight)?;
        z.add_row_vector(&self.bias)?;
        Ok(z)
    }
}

/// Layer stack of an MLP; hidden activation is ReLU, output is logits.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams<T> {
    layers: Vec<DenseLayer<T>>,
}

impl<T: Scalar> MlpParams<T> {
    pub fn new(layers: Vec<DenseLayer<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(GkdError::shape("an MLP needs at least one layer"));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(GkdError::shape(format!(
                    "layer {i} outputs {} but layer {} expects {}",
                    pair[0].out_dim(),
                    i + 1,
                    pair[1].in_dim()
                )));
            }
        }
        Ok(Self { layers })
    }

    /// Seeded initialization for the dimension chain `[in, hidden.., out]`.
    pub fn init(dims: &[usize], seed: u64) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(GkdError::usage(format!("invalid layer dimensions {dims:?}")));
        }
        let mut rng = seeded(seed);
        let layers = dims
            .windows(2)
            .map(|w| DenseLayer::init(w[0], w[1], &mut rng))
            .collect();
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[DenseLayer<T>] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn hidden_dims(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1]
            .iter()
            .map(DenseLayer::out_dim)
            .collect()
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self.layers.iter().map(DenseLayer::zeros_like).collect(),
        }
    }
}

impl<T: Scalar> Parameters<T> for MlpParams<T> {
    fn buffers(&self) -> Vec<&[T]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.as_slice(), l.bias.as_slice()])
            .collect()
    }

    fn buffers_mut(&mut self) -> Vec<&mut [T]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weight.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }
}

/// Forward-pass mode. Training mode draws dropout masks from `seed`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    Eval,
    Train { dropout: f64, seed: u64 },
}

/// Inverted-dropout multipliers (0 or 1/(1-p)) for a `rows x cols` activation.
/// `None` when nothing is dropped.
pub(crate) fn dropout_scale<T: Scalar>(
    rows: usize,
    cols: usize,
    mode: Mode,
    layer: usize,
) -> Option<Vec<T>> {
    match mode {
        Mode::Eval => None,
        Mode::Train { dropout, .. } if dropout <= 0.0 => None,
        Mode::Train { dropout, seed } => {
            let mut rng = seeded(derive_seed(seed, layer as u64));
            let keep = T::of(1.0 / (1.0 - dropout));
            Some(
                (0..rows * cols)
                    .map(|_| {
                        if rng.random::<f64>() < dropout {
                            T::zero()
                        } else {
                            keep
                        }
                    })
                    .collect(),
            )
        }
    }
}

pub(crate) fn relu_inplace<T: Scalar>(m: &mut DenseMatrix<T>) {
    for v in m.as_mut_slice() {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
}

pub(crate) fn apply_scale<T: Scalar>(m: &mut DenseMatrix<T>, scale: &Option<Vec<T>>) {
    if let Some(s) = scale {
        for (v, &k) in m.as_mut_slice().iter_mut().zip(s) {
            *v *= k;
        }
    }
}

struct ForwardCache<T> {
    /// Input to each layer (post-activation, post-dropout of the previous one).
    inputs: Vec<DenseMatrix<T>>,
    /// Pre-activation of each hidden layer.
    hidden_pre: Vec<DenseMatrix<T>>,
    masks: Vec<Option<Vec<T>>>,
    logits: DenseMatrix<T>,
}

fn forward_cached<T: Scalar>(
    params: &MlpParams<T>,
    x: &DenseMatrix<T>,
    mode: Mode,
) -> Result<ForwardCache<T>> {
    if x.cols() != params.input_dim() {
        return Err(GkdError::shape(format!(
            "input has {} features, network expects {}",
            x.cols(),
            params.input_dim()
        )));
    }
    let n_layers = params.layers.len();
    let mut inputs = Vec::with_capacity(n_layers);
    let mut hidden_pre = Vec::with_capacity(n_layers - 1);
    let mut masks = Vec::with_capacity(n_layers - 1);
    let mut current = x.clone();
    for (l, layer) in params.layers[..n_layers - 1].iter().enumerate() {
        let z = layer.affine(&current)?;
        let mut a = z.clone();
        relu_inplace(&mut a);
        let scale = dropout_scale(a.rows(), a.cols(), mode, l);
        apply_scale(&mut a, &scale);
        inputs.push(current);
        hidden_pre.push(z);
        masks.push(scale);
        current = a;
    }
    let logits = params.layers[n_layers - 1].affine(&current)?;
    inputs.push(current);
    Ok(ForwardCache {
        inputs,
        hidden_pre,
        masks,
        logits,
    })
}

/// Logits for every row of `x`.
pub fn mlp_forward<T: Scalar>(
    params: &MlpParams<T>,
    x: &DenseMatrix<T>,
    mode: Mode,
) -> Result<DenseMatrix<T>> {
    if x.cols() != params.input_dim() {
        return Err(GkdError::shape(format!(
            "input has {} features, network expects {}",
            x.cols(),
            params.input_dim()
        )));
    }
    let n_layers = params.layers.len();
    let mut current = x.clone();
    for (l, layer) in params.layers[..n_layers - 1].iter().enumerate() {
        let mut a = layer.affine(&current)?;
        relu_inplace(&mut a);
        let scale = dropout_scale(a.rows(), a.cols(), mode, l);
        apply_scale(&mut a, &scale);
        current = a;
    }
    params.layers[n_layers - 1].affine(&current)
}

/// Class probabilities in eval mode.
pub fn mlp_predict<T: Scalar>(params: &MlpParams<T>, x: &DenseMatrix<T>) -> Result<LabelMatrix<T>> {
    Ok(softmax_rows(&mlp_forward(params, x, Mode::Eval)?))
}

#[derive(Debug, Clone)]
pub struct Gradients<T> {
    pub loss: T,
    pub grads: MlpParams<T>,
}

/// `(softmax(logits) - target) / m` on masked rows, zero elsewhere.
pub(crate) fn softmax_ce_logit_grad<T: Scalar>(
    probs: &LabelMatrix<T>,
    target: &LabelMatrix<T>,
    row_mask: &[bool],
) -> Result<DenseMatrix<T>> {
    let count = row_mask.iter().filter(|&&m| m).count();
    if count == 0 {
        return Err(GkdError::usage("gradient mask selects no rows"));
    }
    let inv = T::one() / T::of(count as f64);
    let mut d = DenseMatrix::zeros(probs.rows(), probs.num_classes());
    for (i, _) in row_mask.iter().enumerate().filter(|(_, &m)| m) {
        for ((o, &p), &t) in d.row_mut(i).iter_mut().zip(probs.row(i)).zip(target.row(i)) {
            *o = (p - t) * inv;
        }
    }
    Ok(d)
}

/// Loss and analytic gradient of the masked soft cross-entropy with respect to every parameter.
pub fn mlp_backward<T: Scalar>(
    params: &MlpParams<T>,
    x: &DenseMatrix<T>,
    target: &LabelMatrix<T>,
    row_mask: &[bool],
    mode: Mode,
) -> Result<Gradients<T>> {
    if target.rows() != x.rows() || target.num_classes() != params.output_dim() {
        return Err(GkdError::shape(format!(
            "target is {}x{}, expected {}x{}",
            target.rows(),
            target.num_classes(),
            x.rows(),
            params.output_dim()
        )));
    }
    let cache = forward_cached(params, x, mode)?;
    let probs = softmax_rows(&cache.logits);
    let loss = cross_entropy_soft(&probs, target, row_mask)?;
    let mut delta = softmax_ce_logit_grad(&probs, target, row_mask)?;

    let mut grads = params.zeros_like();
    for l in (0..params.layers.len()).rev() {
        let g = &mut grads.layers[l];
        g.weight = cache.inputs[l].t_matmul(&delta)?;
        g.bias = delta.column_sums();
        if l == 0 {
            break;
        }
        let mut upstream = delta.matmul_t(&params.layers[l].weight)?;
        apply_scale(&mut upstream, &cache.masks[l - 1]);
        for (u, &z) in upstream
            .as_mut_slice()
            .iter_mut()
            .zip(cache.hidden_pre[l - 1].as_slice())
        {
            if z <= T::zero() {
                *u = T::zero();
            }
        }
        delta = upstream;
    }
    Ok(Gradients { loss, grads })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layer(w: &[&[f64]], b: &[f64]) -> DenseLayer<f64> {
        DenseLayer::new(DenseMatrix::from_rows(w).unwrap(), b.to_vec()).unwrap()
    }

    #[test]
    fn identity_and_bias_forward() {
        let p = MlpParams::new(vec![layer(&[&[1.0, 0.0], &[0.0, 1.0]], &[0.0, 0.0])]).unwrap();
        let x = DenseMatrix::from_rows(&[[1.0, 2.0]]).unwrap();
        assert_eq!(mlp_forward(&p, &x, Mode::Eval).unwrap().row(0), &[1.0, 2.0]);

        let p = MlpParams::new(vec![layer(&[&[1.0, 0.0], &[0.0, 1.0]], &[1.0, -1.0])]).unwrap();
        let x = DenseMatrix::from_rows(&[[0.0, 0.0]]).unwrap();
        assert_eq!(mlp_forward(&p, &x, Mode::Eval).unwrap().row(0), &[1.0, -1.0]);
    }

    #[test]
    fn two_layer_forward_matches_scalar_trace() {
        let w1 = [[0.5, -1.0, 0.25], [0.5, 0.75, -0.5]];
        let b1 = [0.1, 0.2, -0.3];
        let w2 = [[1.0, -1.0], [2.0, 0.5], [-0.5, 3.0]];
        let b2 = [0.0, 0.25];
        let p = MlpParams::new(vec![
            layer(&[&w1[0], &w1[1]], &b1),
            layer(&[&w2[0], &w2[1], &w2[2]], &b2),
        ])
        .unwrap();
        let x = [1.0, 1.0];

        // scalar trace
        let mut h = [0.0; 3];
        for j in 0..3 {
            let mut z = b1[j];
            for i in 0..2 {
                z += x[i] * w1[i][j];
            }
            h[j] = if z > 0.0 { z } else { 0.0 };
        }
        let mut expected = [0.0; 2];
        for k in 0..2 {
            expected[k] = b2[k];
            for j in 0..3 {
                expected[k] += h[j] * w2[j][k];
            }
        }
        // h = [1.1, 0, 0]: logits = [1.1, -1.1 + 0.25]
        assert!((expected[0] - 1.1).abs() < 1e-12);

        let out = mlp_forward(&p, &DenseMatrix::from_rows(&[x]).unwrap(), Mode::Eval).unwrap();
        assert_eq!(out.row(0), &expected);
    }

    #[test]
    fn eval_dropout_is_identity_and_train_dropout_is_seeded() {
        let p = MlpParams::<f64>::init(&[4, 16, 3], 11).unwrap();
        let x = DenseMatrix::from_rows(&[[0.3, -1.0, 2.0, 0.5], [1.0, 1.0, 1.0, 1.0]]).unwrap();
        let a = mlp_forward(&p, &x, Mode::Eval).unwrap();
        let b = mlp_forward(&p, &x, Mode::Train { dropout: 0.0, seed: 9 }).unwrap();
        assert_eq!(a, b);

        let t1 = mlp_forward(&p, &x, Mode::Train { dropout: 0.5, seed: 9 }).unwrap();
        let t2 = mlp_forward(&p, &x, Mode::Train { dropout: 0.5, seed: 9 }).unwrap();
        let t3 = mlp_forward(&p, &x, Mode::Train { dropout: 0.5, seed: 10 }).unwrap();
        assert_eq!(t1, t2);
        assert_ne!(t1, t3);
    }

    #[test]
    fn zero_input_gives_zero_weight_gradient() {
        let p = MlpParams::new(vec![layer(&[&[0.3, -0.2], &[0.1, 0.4]], &[0.2, -0.1])]).unwrap();
        let x = DenseMatrix::zeros(1, 2);
        let target = LabelMatrix::one_hot(&[1], 2).unwrap();
        let g = mlp_backward(&p, &x, &target, &[true], Mode::Eval).unwrap();
        assert!(g.grads.layers()[0].weight.as_slice().iter().all(|&v| v == 0.0));
        let probs = mlp_predict(&p, &x).unwrap();
        let expected = [probs.row(0)[0] - 0.0, probs.row(0)[1] - 1.0];
        for (a, b) in g.grads.layers()[0].bias.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn gradient_vanishes_when_prediction_equals_target() {
        let p = MlpParams::<f64>::init(&[3, 5, 2], 4).unwrap();
        let x = DenseMatrix::from_rows(&[[0.5, -0.2, 1.0], [1.5, 0.3, -0.7]]).unwrap();
        let target = mlp_predict(&p, &x).unwrap();
        let g = mlp_backward(&p, &x, &target, &[true, true], Mode::Eval).unwrap();
        for buf in g.grads.buffers() {
            assert!(buf.iter().all(|v| v.abs() < 1e-15));
        }
    }

    #[test]
    fn unmasked_rows_do_not_contribute() {
        let p = MlpParams::<f64>::init(&[2, 4, 2], 1).unwrap();
        let x = DenseMatrix::from_rows(&[[0.5, -0.2], [100.0, 3.0]]).unwrap();
        let t = LabelMatrix::one_hot(&[0, 1], 2).unwrap();
        let both = mlp_backward(&p, &x, &t, &[true, false], Mode::Eval).unwrap();
        let only = mlp_backward(
            &p,
            &x.select_rows(&[0]),
            &t.select_rows(&[0]),
            &[true],
            Mode::Eval,
        )
        .unwrap();
        assert_eq!(both.loss, only.loss);
        assert_eq!(both.grads, only.grads);
    }

    #[test]
    fn shape_mismatch() {
        let p = MlpParams::<f64>::init(&[3, 2], 0).unwrap();
        let x = DenseMatrix::zeros(1, 4);
        assert!(matches!(mlp_forward(&p, &x, Mode::Eval), Err(GkdError::Shape(_))));
        let bad = vec![
            DenseLayer::init(3, 4, &mut seeded(0)),
            DenseLayer::<f64>::init(5, 2, &mut seeded(0)),
        ];
        assert!(MlpParams::new(bad).is_err());
    }
}
