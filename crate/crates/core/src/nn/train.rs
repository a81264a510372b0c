//! Full-batch Adam training of an MLP against (soft) targets.

use serde::{Deserialize, Serialize};

use crate::error::{GkdError, Result};
use crate::labels::LabelMatrix;
use crate::matrix::DenseMatrix;
use crate::nn::adam::{adam_step, AdamState};
use crate::nn::mlp::{mlp_backward, mlp_predict, MlpParams, Mode};
use crate::rng::derive_seed;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub dropout: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64],
            learning_rate: 1e-2,
            dropout: 0.3,
            epochs: 200,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() || self.hidden.len() > 3 {
            return Err(GkdError::usage(format!(
                "expected 1 to 3 hidden layers, got {}",
                self.hidden.len()
            )));
        }
        if self.hidden.contains(&0) {
            return Err(GkdError::usage("hidden layer width must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(GkdError::usage(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(GkdError::usage(format!(
                "dropout must lie in [0, 1), got {}",
                self.dropout
            )));
        }
        if self.epochs == 0 {
            return Err(GkdError::usage("epochs must be at least 1"));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    pub(crate) fn init_seed(&self) -> u64 {
        derive_seed(self.seed, 0)
    }

    pub(crate) fn epoch_mode(&self, epoch: usize) -> Mode {
        Mode::Train {
            dropout: self.dropout,
            seed: derive_seed(self.seed, 1 + epoch as u64),
        }
    }
}

/// Validation rows scored after every epoch.
pub struct Monitor<'a, T> {
    pub features: &'a DenseMatrix<T>,
    pub labels: &'a [usize],
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub loss: Vec<f64>,
    pub val_accuracy: Vec<f64>,
    /// Epoch with the highest validation accuracy (earliest on ties).
    pub best_epoch: Option<usize>,
}

/// Masked rows selected, then trained full-batch for `config.epochs` epochs.
pub fn train_mlp<T: Scalar>(
    x: &DenseMatrix<T>,
    target: &LabelMatrix<T>,
    row_mask: &[bool],
    config: &TrainConfig,
) -> Result<MlpParams<T>> {
    train_mlp_monitored(x, target, row_mask, config, None).map(|(p, _)| p)
}

pub fn train_mlp_monitored<T: Scalar>(
    x: &DenseMatrix<T>,
    target: &LabelMatrix<T>,
    row_mask: &[bool],
    config: &TrainConfig,
    monitor: Option<Monitor<'_, T>>,
) -> Result<(MlpParams<T>, TrainHistory)> {
    if row_mask.len() != x.rows() || target.rows() != x.rows() {
        return Err(GkdError::shape(format!(
            "{} feature rows, {} target rows, {} mask entries",
            x.rows(),
            target.rows(),
            row_mask.len()
        )));
    }
    let rows: Vec<usize> = (0..x.rows()).filter(|&i| row_mask[i]).collect();
    if rows.is_empty() {
        return Err(GkdError::usage("training mask selects no rows"));
    }
    let xs = x.select_rows(&rows);
    let ts = target.select_rows(&rows);
    let all = vec![true; rows.len()];

    let mut dims = Vec::with_capacity(config.hidden.len() + 2);
    dims.push(x.cols());
    dims.extend_from_slice(&config.hidden);
    dims.push(target.num_classes());
    let mut params = MlpParams::init(&dims, config.init_seed())?;
    let mut state = AdamState::new(&params);
    let lr = T::of(config.learning_rate);

    let mut history = TrainHistory::default();
    let mut best = f64::NEG_INFINITY;
    for epoch in 0..config.epochs {
        let g = mlp_backward(&params, &xs, &ts, &all, config.epoch_mode(epoch))?;
        adam_step(&mut params, &g.grads, &mut state, lr)?;
        history.loss.push(g.loss.as_f64());
        if let Some(m) = &monitor {
            let pred = mlp_predict(&params, m.features)?.argmax();
            let acc = pred.iter().zip(m.labels).filter(|(a, b)| a == b).count() as f64
                / m.labels.len().max(1) as f64;
            if acc > best {
                best = acc;
                history.best_epoch = Some(epoch);
            }
            history.val_accuracy.push(acc);
        }
    }
    Ok((params, history))
}
