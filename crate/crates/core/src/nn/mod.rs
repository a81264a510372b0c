//! Dense networks trained from scratch: MLP, Adam, losses, autoencoder.

pub mod adam;
pub mod autoencoder;
pub mod loss;
pub mod mlp;
pub mod train;

pub use adam::{adam_step, AdamState, Parameters};
pub use autoencoder::{autoencoder_embed, Autoencoder, AutoencoderConfig, AutoencoderFit};
pub use loss::{cross_entropy_soft, softmax_rows};
pub use mlp::{mlp_backward, mlp_forward, mlp_predict, DenseLayer, Gradients, MlpParams, Mode};
pub use train::{train_mlp, train_mlp_monitored, Monitor, TrainConfig, TrainHistory};
