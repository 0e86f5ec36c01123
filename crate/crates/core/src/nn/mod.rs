//! Minimal dense-network engine: matrices, layers with reverse-mode
//! gradients, losses, Adam, and the Gaussian latent helpers.

mod adam;
pub mod gradcheck;
mod layers;
mod loss;
mod tensor;
mod vae;

pub use adam::{adam_step, AdamState};
pub use layers::{sigmoid, BatchNorm, ForwardCache, Layer, LayerSpec, Mode, Network, BN_EPSILON, BN_MOMENTUM};
pub use loss::{bce_const, bce_loss, l1_loss, mean_loss, softmax_ce_loss, PROB_CLAMP};
pub use tensor::{init_gaussian, Matrix, ParamTensor, INIT_STD};
pub use vae::{kl_divergence_gaussian, kl_loss, reparameterize, reparameterize_backward};
