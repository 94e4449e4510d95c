//! Self-contained differentiable function approximators: MLPs with
//! layernorm/dropout, squashed-Gaussian policy heads, an Adam optimizer,
//! Polyak target updates and a bit-exact checkpoint format.

mod adam;
mod checkpoint;
mod gaussian;
mod mlp;
mod scalar;
pub mod gradcheck;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{entry_map, read_checkpoint, write_checkpoint, TensorEntry};
pub use gaussian::{
    clamp_action, clamp_log_std, mean_gate, soft_bound_mean, GaussianHead, SquashedSample,
    LOG_STD_MAX, LOG_STD_MIN, MEAN_SOFT_LIMIT, TANH_EPS,
};
pub use mlp::{
    polyak_update, Activation, DropoutMasks, ForwardCache, GradStore, Layer, LayerGrads,
    LayerSpec, Mlp,
};
pub use scalar::Scalar;
