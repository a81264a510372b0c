//! Feature-only DNN and the joint-feature DNN with mean imputation.

use crate::data::{Dataset, GraphFeatures, Splits};
use crate::error::{GkdError, Result};
use crate::labels::LabelMatrix;
use crate::matrix::DenseMatrix;
use crate::nn::{mlp_predict, MlpParams, TrainConfig};
use crate::pipeline::gkd::train_teacher;
use crate::scalar::Scalar;

/// Supervised MLP on node features, labeled training rows only.
pub fn dnn_baseline<T: Scalar>(ds: &Dataset<T>, splits: &Splits, cfg: &TrainConfig) -> Result<MlpParams<T>> {
    let mask = Splits::mask(&splits.labeled, ds.n());
    train_teacher(&ds.features, &ds.targets(), &mask, cfg)
}

/// MLP over `[node features | graph features]`, missing graph entries mean-imputed.
#[derive(Debug, Clone, PartialEq)]
pub struct JfcModel<T> {
    pub mlp: MlpParams<T>,
    /// Per-column mean of the observed training graph features.
    pub means: Vec<T>,
}

/// Column means over observed entries of `rows`.
pub fn imputation_means<T: Scalar>(g: &GraphFeatures<T>, rows: &[usize]) -> Result<Vec<T>> {
    (0..g.cols())
        .map(|j| {
            let (sum, count) = rows
                .iter()
                .filter_map(|&i| g.get(i, j))
                .fold((T::zero(), 0usize), |(s, c), v| (s + v, c + 1));
            if count == 0 {
                Err(GkdError::usage(format!(
                    "graph feature {j} is not observed in any training row"
                )))
            } else {
                Ok(sum / T::of(count as f64))
            }
        })
        .collect()
}

/// Observed values kept, missing entries replaced by `means`.
pub fn impute<T: Scalar>(g: &GraphFeatures<T>, means: &[T]) -> Result<DenseMatrix<T>> {
    if means.len() != g.cols() {
        return Err(GkdError::shape(format!(
            "{} means for {} graph features",
            means.len(),
            g.cols()
        )));
    }
    let mut out = g.values().clone();
    for i in 0..g.rows() {
        for (j, &mean) in means.iter().enumerate() {
            if g.get(i, j).is_none() {
                out[(i, j)] = mean;
            }
        }
    }
    Ok(out)
}

impl<T: Scalar> JfcModel<T> {
    /// Prediction when the graph modality is unavailable: every graph column takes its training mean.
    pub fn predict_without_graph(&self, x: &DenseMatrix<T>) -> Result<LabelMatrix<T>> {
        let filler = DenseMatrix::from_vec(
            x.rows(),
            self.means.len(),
            (0..x.rows()).flat_map(|_| self.means.iter().copied()).collect(),
        )?;
        mlp_predict(&self.mlp, &x.hstack(&filler)?)
    }

    /// Prediction with (partially observed) graph features.
    pub fn predict_with_graph(&self, x: &DenseMatrix<T>, g: &GraphFeatures<T>) -> Result<LabelMatrix<T>> {
        mlp_predict(&self.mlp, &x.hstack(&impute(g, &self.means)?)?)
    }
}

pub fn dnn_jfc_baseline<T: Scalar>(ds: &Dataset<T>, splits: &Splits, cfg: &TrainConfig) -> Result<JfcModel<T>> {
    let means = imputation_means(&ds.graph_features, &splits.train)?;
    let joint = ds.features.hstack(&impute(&ds.graph_features, &means)?)?;
    let mask = Splits::mask(&splits.labeled, ds.n());
    let mlp = train_teacher(&joint, &ds.targets(), &mask, cfg)?;
    Ok(JfcModel { mlp, means })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, make_splits, SplitSpec, SyntheticParams};
    use crate::nn::train_mlp;

    fn setup(p_missing: f64) -> (Dataset<f64>, Splits) {
        let ds = generate_synthetic(&SyntheticParams {
            n: 100,
            node_dim: 6,
            informative: 3,
            class_sep: 2.0,
            p_missing,
            seed: 1,
            ..SyntheticParams::default()
        })
        .unwrap();
        let splits = make_splits(100, &SplitSpec { labeled: 0.5, ..SplitSpec::default() }, 2).unwrap();
        (ds, splits)
    }

    fn cfg(seed: u64) -> TrainConfig {
        TrainConfig {
            hidden: vec![8],
            epochs: 80,
            seed,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn mean_of_observed_entries() {
        let g = GraphFeatures::new(
            DenseMatrix::from_rows(&[[1.0], [0.0], [3.0], [0.0]]).unwrap(),
            vec![true, false, true, false],
        )
        .unwrap();
        let means = imputation_means(&g, &[0, 1, 2, 3]).unwrap();
        assert_eq!(means, vec![2.0]);
        assert_eq!(impute(&g, &means).unwrap().as_slice(), &[1.0, 2.0, 3.0, 2.0]);
        assert!(imputation_means(&g, &[1, 3]).is_err());
    }

    #[test]
    fn dnn_matches_teacher_and_fits_separable_labels() {
        let (ds, splits) = setup(0.0);
        let model = dnn_baseline(&ds, &splits, &cfg(3)).unwrap();
        let mask = Splits::mask(&splits.labeled, ds.n());
        assert_eq!(model, train_teacher(&ds.features, &ds.targets(), &mask, &cfg(3)).unwrap());
        assert_eq!(model, dnn_baseline(&ds, &splits, &cfg(3)).unwrap());
        let xl = ds.features.select_rows(&splits.labeled);
        let pred = mlp_predict(&model, &xl).unwrap().argmax();
        assert_eq!(pred, ds.labels_at(&splits.labeled));
    }

    #[test]
    fn jfc_without_missing_is_concatenated_mlp() {
        let (ds, splits) = setup(0.0);
        let model = dnn_jfc_baseline(&ds, &splits, &cfg(4)).unwrap();
        let joint = ds.features.hstack(ds.graph_features.values()).unwrap();
        let mask = Splits::mask(&splits.labeled, ds.n());
        assert_eq!(model.mlp, train_mlp(&joint, &ds.targets(), &mask, &cfg(4)).unwrap());
    }

    #[test]
    fn jfc_predicts_valid_rows_without_graph() {
        let (ds, splits) = setup(0.5);
        let model = dnn_jfc_baseline(&ds, &splits, &cfg(5)).unwrap();
        let xt = ds.features.select_rows(&splits.test);
        let probs = model.predict_without_graph(&xt).unwrap();
        for i in 0..probs.rows() {
            let row = probs.row(i);
            assert!(row.iter().all(|v| v.is_finite() && *v >= 0.0));
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        // all-missing graph features are the same as no graph
        let hidden = GraphFeatures::new(
            DenseMatrix::zeros(xt.rows(), 4),
            vec![false; xt.rows() * 4],
        )
        .unwrap();
        assert_eq!(model.predict_with_graph(&xt, &hidden).unwrap(), probs);
    }
}
