//! Model architecture configuration.

use serde::{Deserialize, Serialize};

use crate::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EncoderKind {
    /// Four-layer stride-then-unit convolution stack with average pool and
    /// linear projection; the RL default.
    Conv,
    /// Strided 4x4 convolution pyramid mirroring the decoder; supports
    /// skip connections and is the offline-prediction default.
    Dcgan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    /// Square frame edge; must be 4 * 2^k for the decoder pyramid.
    pub frame_size: usize,
    /// Context frames C fed jointly to the encoder.
    pub context: usize,
    /// Prediction horizon H.
    pub horizon: usize,
    /// Action dimension A.
    pub action_dim: usize,
    /// Full feature dimension n.
    pub feat_dim: usize,
    /// Agent slice dimension l; must satisfy l <= n / 8.
    pub agent_dim: usize,
    pub encoder: EncoderKind,
    /// Convolution width (channel count of the first level).
    pub channels: usize,
    /// Hidden width of the agent-dynamics block.
    pub dyn_hidden: usize,
    /// Hidden layers of the agent-dynamics block.
    pub dyn_layers: usize,
    /// U-Net style skip connections from the context encoding into the
    /// decoder (Dcgan encoder only).
    pub skip_connections: bool,
    /// Treat the agent slice as constant input to the rollout (no gradient
    /// back into the encoder through the recurrent path).
    pub detach_agent_rollout: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            frame_size: 64,
            context: 3,
            horizon: 10,
            action_dim: 3,
            feat_dim: 2048,
            agent_dim: 32,
            encoder: EncoderKind::Conv,
            channels: 32,
            dyn_hidden: 512,
            dyn_layers: 2,
            skip_connections: false,
            detach_agent_rollout: false,
        }
    }
}

impl ModelConfig {
    /// Scene slice dimension m = n - l.
    pub fn scene_dim(&self) -> usize {
        self.feat_dim - self.agent_dim
    }

    /// Encoder input channels (context frames are channel-concatenated).
    pub fn in_channels(&self) -> usize {
        3 * self.context
    }

    /// Number of stride-2 levels between 4x4 and the frame size.
    pub fn pyramid_levels(&self) -> usize {
        let mut s = 4;
        let mut levels = 0;
        while s < self.frame_size {
            s *= 2;
            levels += 1;
        }
        levels
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let err = |m: String| Err(ModelError::Config(m));
        if self.context == 0 || self.horizon == 0 {
            return err("context and horizon must be >= 1".into());
        }
        if self.agent_dim == 0 || self.feat_dim <= self.agent_dim {
            return err(format!(
                "need 0 < agent_dim < feat_dim, got {} / {}",
                self.agent_dim, self.feat_dim
            ));
        }
        if self.agent_dim * 8 > self.feat_dim {
            return err(format!(
                "agent slice must be a bottleneck: agent_dim {} > feat_dim {} / 8",
                self.agent_dim, self.feat_dim
            ));
        }
        let mut s = 4;
        while s < self.frame_size {
            s *= 2;
        }
        if s != self.frame_size {
            return err(format!("frame_size {} is not 4 * 2^k", self.frame_size));
        }
        if self.skip_connections && self.encoder != EncoderKind::Dcgan {
            return err("skip connections require the dcgan encoder".into());
        }
        if self.action_dim == 0 || self.channels == 0 || self.dyn_hidden == 0 || self.dyn_layers == 0
        {
            return err("action_dim, channels, dyn_hidden, dyn_layers must be positive".into());
        }
        Ok(())
    }
}
