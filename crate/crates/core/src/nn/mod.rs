//! Small deterministic neural-network toolkit with hand-written backprop.

mod mixer;
mod mlp;
mod ops;
mod optim;

use thiserror::Error;

pub use mixer::{Mixer, MixerCache};
pub use mlp::{Linear, Mlp, MlpCache, OUTPUT_INIT};
pub use ops::*;
pub use optim::{copy_params, soft_update, zeros_like, Adam, Params, TargetPair, TargetUpdate};

#[derive(Debug, Error, PartialEq)]
pub enum NnError {
    #[error("every entry of the mask is illegal")]
    NoLegalAction,
    #[error("temperature must be positive, got {0}")]
    Temperature(f32),
}
