//! Graph knowledge distillation for node classification when the graph is
//! missing at inference time.
//!
//! A feature-only teacher network labels the training nodes, label propagation
//! smooths those labels over a population graph, and a graph-free student
//! network is fit to the result. Test nodes need node features only.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases below
//! fix it to `f64`, with `*32` variants for single precision.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod data;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod graph;
pub mod labels;
pub mod lpa;
pub mod matrix;
pub mod nn;
pub mod pipeline;
pub mod rng;
pub mod scalar;
pub mod sparse;

pub use error::{GkdError, Result};
pub use scalar::Scalar;

pub use data::{
    apply_missing, generate_synthetic, load_csv_dataset, make_splits, write_csv_dataset, SplitSpec, Splits,
    SyntheticParams,
};
pub use experiment::{ExperimentConfig, Method};
pub use eval::{accuracy, auc_binary, macro_f1, run_trials, Metrics, MetricsReport};
pub use graph::{row_normalize, similarity_graph, sym_normalize, threshold_graph, union_graphs, SparseGraph};
pub use lpa::{lpa_fixed_point_oracle, propagate, LpaConfig};
pub use nn::{train_mlp, TrainConfig};
pub use pipeline::{dnn_baseline, dnn_jfc_baseline, gcn_baseline, gkd_train, predict, SavedModel};

pub type Matrix = matrix::DenseMatrix<f64>;
pub type Matrix32 = matrix::DenseMatrix<f32>;
pub type Labels = labels::LabelMatrix<f64>;
pub type Labels32 = labels::LabelMatrix<f32>;
pub type Csr = sparse::CsrMatrix<f64>;
pub type Mlp = nn::MlpParams<f64>;
pub type Mlp32 = nn::MlpParams<f32>;
pub type Operator = graph::PropagationOperator<f64>;
pub type Dataset = data::Dataset<f64>;
pub type Dataset32 = data::Dataset<f32>;
pub type GraphFeatures = data::GraphFeatures<f64>;
pub type GkdModel = pipeline::GkdModel<f64>;
pub type GkdModel32 = pipeline::GkdModel<f32>;
pub type Gcn = pipeline::GcnParams<f64>;
pub type Model = pipeline::SavedModel<f64>;
