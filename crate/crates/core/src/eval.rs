//! Classification metrics and multi-seed aggregation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GkdError, Result};
use crate::scalar::Scalar;

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(GkdError::usage(format!(
            "prediction and truth lengths differ: {a} vs {b}"
        )));
    }
    if a == 0 {
        return Err(GkdError::usage("metrics need at least one sample"));
    }
    Ok(())
}

pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check_lengths(pred.len(), truth.len())?;
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// Unweighted mean of per-class F1. A class with no true and no predicted
/// members contributes zero.
pub fn macro_f1(pred: &[usize], truth: &[usize], num_classes: usize) -> Result<f64> {
    check_lengths(pred.len(), truth.len())?;
    if let Some(&bad) = pred.iter().chain(truth).find(|&&c| c >= num_classes) {
        return Err(GkdError::usage(format!(
            "class {bad} outside [0, {num_classes})"
        )));
    }
    let mut tp = vec![0usize; num_classes];
    let mut fp = vec![0usize; num_classes];
    let mut fn_ = vec![0usize; num_classes];
    for (&p, &t) in pred.iter().zip(truth) {
        if p == t {
            tp[p] += 1;
        } else {
            fp[p] += 1;
            fn_[t] += 1;
        }
    }
    let total: f64 = (0..num_classes)
        .map(|c| {
            let denom = 2 * tp[c] + fp[c] + fn_[c];
            if denom == 0 {
                0.0
            } else {
                2.0 * tp[c] as f64 / denom as f64
            }
        })
        .sum();
    Ok(total / num_classes as f64)
}

/// Mann–Whitney estimate of P(score of a positive > score of a negative),
/// ties counted as one half. Label 1 is positive, everything else negative.
pub fn auc_binary<T: Scalar>(scores: &[T], truth: &[usize]) -> Result<f64> {
    check_lengths(scores.len(), truth.len())?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(GkdError::usage("NaN score"));
    }
    let n_pos = truth.iter().filter(|&&t| t == 1).count();
    let n_neg = truth.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(GkdError::UndefinedMetric(
            "AUC needs both classes present".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("no NaN"));

    // Twice the midrank, so every quantity stays an exact integer.
    let mut rank_sum_x2 = 0u64;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // ranks start+1..=end, midrank = (start + 1 + end) / 2
        let midrank_x2 = (start + 1 + end) as u64;
        let positives = order[start..end].iter().filter(|&&i| truth[i] == 1).count() as u64;
        rank_sum_x2 += midrank_x2 * positives;
        start = end;
    }
    let (p, q) = (n_pos as u64, n_neg as u64);
    let u_x2 = rank_sum_x2 - p * (p + 1);
    Ok(u_x2 as f64 / (2 * p * q) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub auc: f64,
}

impl Metrics {
    /// Hard predictions are the argmax of `probs`; AUC uses the class-1 column.
    pub fn from_probabilities<T: Scalar>(
        probs: &crate::labels::LabelMatrix<T>,
        truth: &[usize],
    ) -> Result<Self> {
        let pred = probs.argmax();
        Ok(Self {
            accuracy: accuracy(&pred, truth)?,
            macro_f1: macro_f1(&pred, truth, probs.num_classes())?,
            auc: auc_binary(&probs.class_column(1), truth)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub metrics: Option<Metrics>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample (n - 1) standard deviation; zero for a single value.
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                std: f64::NAN,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub accuracy: Summary,
    pub macro_f1: Summary,
    pub auc: Summary,
    pub completed: usize,
}

impl Aggregate {
    pub fn from_seeds(seeds: &[SeedResult]) -> Self {
        let done: Vec<Metrics> = seeds.iter().filter_map(|s| s.metrics).collect();
        let col = |f: fn(&Metrics) -> f64| done.iter().map(f).collect::<Vec<_>>();
        Self {
            accuracy: Summary::of(&col(|m| m.accuracy)),
            macro_f1: Summary::of(&col(|m| m.macro_f1)),
            auc: Summary::of(&col(|m| m.auc)),
            completed: done.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub method: String,
    pub config_fingerprint: String,
    /// Free-form run details (selected hyperparameters, generator, ...).
    #[serde(default)]
    pub details: serde_json::Map<String, serde_json::Value>,
    pub per_seed: Vec<SeedResult>,
    pub aggregate: Aggregate,
}

impl MetricsReport {
    pub fn all_completed(&self) -> bool {
        self.per_seed.iter().all(|s| s.metrics.is_some())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            GkdError::parse("report", e.line() as u64, e.to_string())
        })
    }

    pub const CSV_HEADER: &'static str = "method,config,seed,accuracy,macro_f1,auc";

    /// One line per seed, without the header.
    pub fn csv_rows(&self) -> Vec<String> {
        self.per_seed
            .iter()
            .map(|s| match s.metrics {
                Some(m) => format!(
                    "{},{},{},{},{},{}",
                    self.method, self.config_fingerprint, s.seed, m.accuracy, m.macro_f1, m.auc
                ),
                None => format!("{},{},{},,,", self.method, self.config_fingerprint, s.seed),
            })
            .collect()
    }
}

/// Runs `trial` for every seed (in parallel) and aggregates in seed-list order.
/// Failed seeds are recorded and excluded from the aggregate; if every seed
/// fails the first error is returned.
pub fn run_trials<F>(
    method: &str,
    config_fingerprint: &str,
    seeds: &[u64],
    trial: F,
) -> Result<MetricsReport>
where
    F: Fn(u64) -> Result<Metrics> + Sync,
{
    if seeds.is_empty() {
        return Err(GkdError::usage("at least one seed is required"));
    }
    let outcomes: Vec<Result<Metrics>> = seeds.par_iter().map(|&s| trial(s)).collect();
    if outcomes.iter().all(|o| o.is_err()) {
        return Err(outcomes.into_iter().find_map(|o| o.err()).expect("non-empty"));
    }
    let per_seed: Vec<SeedResult> = seeds
        .iter()
        .zip(outcomes)
        .map(|(&seed, o)| match o {
            Ok(m) => SeedResult {
                seed,
                metrics: Some(m),
                error: None,
            },
            Err(e) => {
                log::warn!("{method}: seed {seed} failed: {e}");
                SeedResult {
                    seed,
                    metrics: None,
                    error: Some(e.to_string()),
                }
            }
        })
        .collect();
    let aggregate = Aggregate::from_seeds(&per_seed);
    Ok(MetricsReport {
        method: method.to_owned(),
        config_fingerprint: config_fingerprint.to_owned(),
        details: serde_json::Map::new(),
        per_seed,
        aggregate,
    })
}
