//! GKD training and the comparison baselines.

pub mod baselines;
pub mod gcn;
pub mod gkd;
pub mod model_io;

pub use baselines::{dnn_baseline, dnn_jfc_baseline, impute, imputation_means, JfcModel};
pub use gcn::{gcn_backward, gcn_baseline, gcn_forward, gcn_predict_isolated, GcnParams};
pub use gkd::{gkd_train, predict, propagated_labels, pseudo_label, train_student, train_teacher, GkdModel};
pub use model_io::{SavedModel, MAGIC};
