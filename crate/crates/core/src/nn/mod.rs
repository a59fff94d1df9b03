//! Dense building blocks: perceptrons, the GRU cell, losses and optimizers,
//! each with a hand-written backward pass.

pub mod gradcheck;
pub mod gru;
pub mod loss;
pub mod mlp;
pub mod optim;
pub mod params;

pub use gru::{GruCache, GruCell};
pub use loss::{l2_state_loss, weighted_cross_entropy};
pub use mlp::{Mlp, MlpCache, MlpSpec};
pub use optim::{clip_gradients, Adam, AdamConfig, OptimizerState, PlateauScheduler};
pub use params::{glorot_uniform, ParamId, ParameterSet};

use rand::RngCore;

/// Shorter-lived reborrow of an optional dropout RNG.
pub(crate) fn reborrow<'b>(rng: &'b mut Option<&mut dyn RngCore>) -> Option<&'b mut dyn RngCore> {
    rng.as_mut().map(|r| &mut **r as &mut dyn RngCore)
}
