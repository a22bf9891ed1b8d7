//! Small CPU neural-network substrate with hand-written backward passes.
//!
//! Everything runs in f64 so that analytic gradients can be checked against
//! central finite differences to tight tolerances. Layers are pure: `forward`
//! takes parameters by reference and returns outputs, `backward` takes the
//! same inputs plus the output gradient and accumulates parameter gradients
//! into a [`Grads`] buffer. Nothing here owns an RNG or mutates globals, so
//! concurrent evaluation with shared read-only parameters is safe.

pub mod act;
pub mod adam;
pub mod conv;
pub mod gradcheck;
pub mod init;
pub mod linear;
pub mod norm;
pub mod pool;
pub mod store;

pub use act::*;
pub use adam::Adam;
pub use conv::{Conv2d, ConvTranspose2d};
pub use linear::Linear;
pub use norm::LayerNorm;
pub use pool::AvgPool2d;
pub use store::{Grads, NamedTensor, ParamId, ParamStore, StoreSnapshot};

/// Dynamic-dimension tensor used for parameter storage.
pub type Tensor = ndarray::ArrayD<f64>;

#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error("shape mismatch for {what}: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        what: String,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("snapshot does not match store layout: {0}")]
    SnapshotMismatch(String),
}
