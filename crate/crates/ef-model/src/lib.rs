//! Visuomotor prediction stack: convolutional encoder with a scene/agent
//! feature split, an action-conditioned recurrent block that rolls the agent
//! slice forward, and a transposed-convolution decoder.
//!
//! The representation `h` produced by the encoder is split into a wide scene
//! slice `h_s` and a narrow agent slice `h_a` (the bottleneck). Only `h_a` is
//! advanced by the recurrent block, one action per step; `h_s` is reused
//! unchanged at the reconstruction step ("fast-forwarded"), so environment
//! dynamics cannot be expressed through the rollout and action-predictable
//! content is pushed into the agent slice.

pub mod checkpoint;
pub mod config;
pub mod decoder;
pub mod dynamics;
pub mod encoder;
pub mod loss;
pub mod model;
pub mod split;

pub use checkpoint::ModelCheckpoint;
pub use config::{EncoderKind, ModelConfig};
pub use decoder::Decoder;
pub use dynamics::AgentDynamics;
pub use encoder::Encoder;
pub use loss::{ef_backward, ef_forward, ef_forward_at, EfDiagnostics, EfInputGrads, EfTrace};
pub use model::VisuomotorModel;
pub use split::FeatureSplit;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("input mismatch: {0}")]
    Input(String),
    #[error(transparent)]
    Nn(#[from] ef_nn::NnError),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}
