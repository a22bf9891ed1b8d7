//! Prediction-model checkpoints: configuration plus all parameter groups.

use std::fs;
use std::path::Path;

use ef_nn::{ParamStore, StoreSnapshot};
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::model::VisuomotorModel;
use crate::ModelError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelCheckpoint {
    pub config: ModelConfig,
    pub params: StoreSnapshot,
}

impl ModelCheckpoint {
    pub fn capture(cfg: &ModelConfig, ps: &ParamStore) -> Self {
        Self { config: cfg.clone(), params: ps.snapshot() }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        let bytes = bincode::serialize(self)
            .map_err(|e| ModelError::Checkpoint(format!("encode: {e}")))?;
        fs::write(path.as_ref(), bytes)
            .map_err(|e| ModelError::Checkpoint(format!("write {}: {e}", path.as_ref().display())))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let bytes = fs::read(path.as_ref())
            .map_err(|e| ModelError::Checkpoint(format!("read {}: {e}", path.as_ref().display())))?;
        bincode::deserialize(&bytes).map_err(|e| ModelError::Checkpoint(format!("decode: {e}")))
    }

    /// Rebuild the model and its parameters. Stored tensors are validated
    /// against the shapes the configuration implies.
    pub fn instantiate(&self) -> Result<(VisuomotorModel, ParamStore), ModelError> {
        let mut ps = ParamStore::new();
        // construction RNG is irrelevant: every weight is overwritten
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(0);
        let model = VisuomotorModel::new(self.config.clone(), &mut ps, &mut rng)?;
        ps.restore(&self.params)
            .map_err(|e| ModelError::Checkpoint(format!("shape validation failed: {e}")))?;
        Ok((model, ps))
    }
}
