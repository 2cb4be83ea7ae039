//! A small differentiable-network engine: the layer kinds needed by the
//! encoder, decoder and classifier head, exact reverse-mode gradients, and
//! Adam.

mod adam;
mod builders;
mod layers;
mod params;
mod spec;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use builders::{build_conv_decoder, build_conv_encoder, build_mlp_decoder, build_mlp_encoder};
pub use layers::{backward, commit_batch_stats, forward, Activations, Mode, BN_EPSILON, BN_MOMENTUM};
pub use params::{check_params, init_params, Grads, NamedTensor, Params};
pub use spec::{Layer, NetworkSpec};
pub use tensor::Tensor;
