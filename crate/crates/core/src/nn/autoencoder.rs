//! Supervised autoencoder that embeds graph-modality features into a low-dimensional
//! latent space.
//!
//! Encoder `z = tanh(x·We + be)`, linear decoder back to the input space and a linear
//! classifier head on `z`. The objective is
//! `recon_weight · MSE(all rows) + CE(labeled rows)`.

use serde::{Deserialize, Serialize};

use crate::error::{GkdError, Result};
use crate::labels::LabelMatrix;
use crate::matrix::DenseMatrix;
use crate::nn::adam::{adam_step, AdamState, Parameters};
use crate::nn::loss::{cross_entropy_soft, softmax_rows};
use crate::nn::mlp::{softmax_ce_logit_grad, DenseLayer};
use crate::rng::{derive_seed, seeded};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AutoencoderConfig {
    /// Unset means half the input width, clamped to 1..=8.
    pub latent_dim: Option<usize>,
    pub recon_weight: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl AutoencoderConfig {
    pub fn latent_for(&self, input_dim: usize) -> usize {
        self.latent_dim.unwrap_or((input_dim / 2).clamp(1, 8))
    }
}

impl Default for AutoencoderConfig {
    fn default() -> Self {
        Self {
            latent_dim: None,
            recon_weight: 1.0,
            learning_rate: 1e-2,
            epochs: 300,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Autoencoder<T> {
    pub encoder: DenseLayer<T>,
    pub decoder: DenseLayer<T>,
    pub classifier: DenseLayer<T>,
}

impl<T: Scalar> Parameters<T> for Autoencoder<T> {
    fn buffers(&self) -> Vec<&[T]> {
        [&self.encoder, &self.decoder, &self.classifier]
            .into_iter()
            .flat_map(|l| [l.weight.as_slice(), l.bias.as_slice()])
            .collect()
    }

    fn buffers_mut(&mut self) -> Vec<&mut [T]> {
        [&mut self.encoder, &mut self.decoder, &mut self.classifier]
            .into_iter()
            .flat_map(|l| [l.weight.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }
}

impl<T: Scalar> Autoencoder<T> {
    pub fn init(input_dim: usize, latent_dim: usize, num_classes: usize, seed: u64) -> Self {
        let mut rng = seeded(seed);
        Self {
            encoder: DenseLayer::init(input_dim, latent_dim, &mut rng),
            decoder: DenseLayer::init(latent_dim, input_dim, &mut rng),
            classifier: DenseLayer::init(latent_dim, num_classes, &mut rng),
        }
    }

    pub fn encode(&self, x: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        if x.cols() != self.encoder.in_dim() {
            return Err(GkdError::shape(format!(
                "input has {} columns, encoder expects {}",
                x.cols(),
                self.encoder.in_dim()
            )));
        }
        Ok(self.encoder.affine(x)?.map(|v| v.tanh()))
    }

    /// Combined objective and its gradient.
    pub fn loss_and_gradients(
        &self,
        x: &DenseMatrix<T>,
        targets: &LabelMatrix<T>,
        labeled_mask: &[bool],
        recon_weight: T,
    ) -> Result<(T, Self)> {
        if targets.rows() != x.rows() || labeled_mask.len() != x.rows() {
            return Err(GkdError::shape(format!(
                "{} rows of features, {} target rows, {} mask entries",
                x.rows(),
                targets.rows(),
                labeled_mask.len()
            )));
        }
        let z = self.encode(x)?;
        let recon = self.decoder.affine(&z)?;
        let logits = self.classifier.affine(&z)?;

        let scale = T::one() / T::of((x.rows() * x.cols()) as f64);
        let mut d_recon = DenseMatrix::zeros(recon.rows(), recon.cols());
        let mut mse = T::zero();
        for ((d, &r), &xv) in d_recon
            .as_mut_slice()
            .iter_mut()
            .zip(recon.as_slice())
            .zip(x.as_slice())
        {
            let e = r - xv;
            mse += e * e;
            *d = recon_weight * T::of(2.0) * e * scale;
        }
        let mut loss = recon_weight * mse * scale;

        let any_labeled = labeled_mask.iter().any(|&m| m);
        let d_logits = if any_labeled {
            let probs = softmax_rows(&logits);
            loss += cross_entropy_soft(&probs, targets, labeled_mask)?;
            softmax_ce_logit_grad(&probs, targets, labeled_mask)?
        } else {
            DenseMatrix::zeros(logits.rows(), logits.cols())
        };

        let decoder = DenseLayer {
            weight: z.t_matmul(&d_recon)?,
            bias: d_recon.column_sums(),
        };
        let classifier = DenseLayer {
            weight: z.t_matmul(&d_logits)?,
            bias: d_logits.column_sums(),
        };
        let mut d_z = d_recon.matmul_t(&self.decoder.weight)?;
        let d_z_cls = d_logits.matmul_t(&self.classifier.weight)?;
        for ((d, &c), &zv) in d_z
            .as_mut_slice()
            .iter_mut()
            .zip(d_z_cls.as_slice())
            .zip(z.as_slice())
        {
            *d = (*d + c) * (T::one() - zv * zv);
        }
        let encoder = DenseLayer {
            weight: x.t_matmul(&d_z)?,
            bias: d_z.column_sums(),
        };
        Ok((
            loss,
            Self {
                encoder,
                decoder,
                classifier,
            },
        ))
    }
}

#[derive(Debug, Clone)]
pub struct AutoencoderFit<T> {
    pub model: Autoencoder<T>,
    /// Encoder output per input row.
    pub latent: DenseMatrix<T>,
    /// Objective before each update.
    pub loss_history: Vec<f64>,
}

pub fn autoencoder_embed<T: Scalar>(
    x_aux: &DenseMatrix<T>,
    targets: &LabelMatrix<T>,
    labeled_mask: &[bool],
    config: &AutoencoderConfig,
) -> Result<AutoencoderFit<T>> {
    let latent_dim = config.latent_for(x_aux.cols());
    if latent_dim == 0 || latent_dim >= x_aux.cols() {
        return Err(GkdError::usage(format!(
            "latent dimension {latent_dim} must be in [1, {})",
            x_aux.cols()
        )));
    }
    if config.recon_weight < 0.0 {
        return Err(GkdError::usage("reconstruction weight must be non-negative"));
    }
    let mut model = Autoencoder::init(
        x_aux.cols(),
        latent_dim,
        targets.num_classes(),
        derive_seed(config.seed, 0),
    );
    let mut state = AdamState::new(&model);
    let lr = T::of(config.learning_rate);
    let w = T::of(config.recon_weight);
    let mut loss_history = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        let (loss, grads) = model.loss_and_gradients(x_aux, targets, labeled_mask, w)?;
        loss_history.push(loss.as_f64());
        adam_step(&mut model, &grads, &mut state, lr)?;
    }
    let latent = model.encode(x_aux)?;
    Ok(AutoencoderFit {
        model,
        latent,
        loss_history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn toy(n: usize, seed: u64) -> (DenseMatrix<f64>, Vec<usize>) {
        let mut rng = seeded(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let c = i % 2;
            let s = if c == 0 { 1.0 } else { -1.0 };
            rows.push(
                (0..6)
                    .map(|j| s * (j as f64 * 0.2 + 0.5) + rng.random_range(-0.3..0.3))
                    .collect::<Vec<f64>>(),
            );
            labels.push(c);
        }
        (DenseMatrix::from_f64_rows(&rows).unwrap(), labels)
    }

    #[test]
    fn gradients_match_finite_differences() {
        let (x, y) = toy(7, 2);
        let t = LabelMatrix::one_hot(&y, 2).unwrap();
        let mask = [true, false, true, true, false, false, true];
        let model = Autoencoder::<f64>::init(6, 3, 2, 5);
        let w = 0.7;
        let (_, grads) = model.loss_and_gradients(&x, &t, &mask, w).unwrap();
        let h = 1e-5;
        let mut probe = model.clone();
        let n_bufs = probe.buffers().len();
        for b in 0..n_bufs {
            let len = probe.buffers()[b].len();
            for j in 0..len {
                let orig = probe.buffers()[b][j];
                probe.buffers_mut()[b][j] = orig + h;
                let up = probe.loss_and_gradients(&x, &t, &mask, w).unwrap().0;
                probe.buffers_mut()[b][j] = orig - h;
                let down = probe.loss_and_gradients(&x, &t, &mask, w).unwrap().0;
                probe.buffers_mut()[b][j] = orig;
                let numeric = (up - down) / (2.0 * h);
                let analytic = grads.buffers()[b][j];
                let rel = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-6);
                assert!(rel < 1e-4, "buffer {b} entry {j}: {analytic} vs {numeric}");
            }
        }
    }

    #[test]
    fn loss_decreases_on_toy_set() {
        let (x, y) = toy(50, 1);
        let t = LabelMatrix::one_hot(&y, 2).unwrap();
        let mask: Vec<bool> = (0..50).map(|i| i % 3 == 0).collect();
        let cfg = AutoencoderConfig {
            latent_dim: Some(2),
            epochs: 150,
            ..AutoencoderConfig::default()
        };
        let fit = autoencoder_embed(&x, &t, &mask, &cfg).unwrap();
        let h = &fit.loss_history;
        assert!(h[h.len() - 1] < 0.5 * h[0]);
        // trend over windows of 10 epochs is non-increasing
        let windows: Vec<f64> = h.chunks(10).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
        assert!(windows.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(fit.latent.shape(), (50, 2));
    }

    #[test]
    fn pure_classification_latent_separates_classes() {
        let (x, y) = toy(40, 3);
        let t = LabelMatrix::one_hot(&y, 2).unwrap();
        let cfg = AutoencoderConfig {
            latent_dim: Some(2),
            recon_weight: 0.0,
            epochs: 200,
            ..AutoencoderConfig::default()
        };
        let fit = autoencoder_embed(&x, &t, &[true; 40], &cfg).unwrap();
        let logits = fit.model.classifier.affine(&fit.latent).unwrap();
        assert_eq!(logits.argmax_rows(), y);
    }

    #[test]
    fn identical_rows_embed_identically() {
        let row = [0.3, -0.1, 0.8, 1.2];
        let x = DenseMatrix::from_rows(&[row, row, row]).unwrap();
        let t = LabelMatrix::one_hot(&[0, 1, 0], 2).unwrap();
        let cfg = AutoencoderConfig {
            latent_dim: Some(2),
            epochs: 20,
            ..AutoencoderConfig::default()
        };
        let fit = autoencoder_embed(&x, &t, &[true, true, false], &cfg).unwrap();
        assert_eq!(fit.latent.row(0), fit.latent.row(1));
        assert_eq!(fit.latent.row(0), fit.latent.row(2));
    }

    #[test]
    fn latent_must_compress() {
        let (x, y) = toy(4, 0);
        let t = LabelMatrix::one_hot(&y, 2).unwrap();
        let cfg = AutoencoderConfig {
            latent_dim: Some(6),
            ..AutoencoderConfig::default()
        };
        assert!(matches!(
            autoencoder_embed(&x, &t, &[true; 4], &cfg),
            Err(GkdError::Usage(_))
        ));
    }
}
