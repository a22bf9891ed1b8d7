//! The assembled prediction stack.

use ef_nn::ParamStore;
use ndarray::{Array2, Array3, Array4, ArrayView2, ArrayView3, ArrayView4, Axis};
use rand::Rng;

use crate::config::ModelConfig;
use crate::decoder::Decoder;
use crate::dynamics::AgentDynamics;
use crate::encoder::{Encoder, EncoderTrace};
use crate::split::FeatureSplit;
use crate::ModelError;

/// Encoder, agent-dynamics block and decoder over one parameter store.
/// Parameter names are prefixed `enc.`, `dyn.`, `dec.` so parameter groups
/// can be addressed independently.
#[derive(Debug, Clone)]
pub struct VisuomotorModel {
    pub cfg: ModelConfig,
    pub encoder: Encoder,
    pub dynamics: AgentDynamics,
    pub decoder: Decoder,
}

impl VisuomotorModel {
    pub fn new(cfg: ModelConfig, ps: &mut ParamStore, rng: &mut impl Rng) -> Result<Self, ModelError> {
        cfg.validate()?;
        if cfg.encoder == crate::EncoderKind::Conv && cfg.frame_size < 32 {
            return Err(ModelError::Config(
                "conv encoder needs frame_size >= 32; use the dcgan encoder for smaller frames"
                    .into(),
            ));
        }
        let encoder = Encoder::new(&cfg, ps, rng);
        let dynamics = AgentDynamics::new(&cfg, ps, rng);
        let decoder = Decoder::new(&cfg, ps, rng);
        Ok(Self { cfg, encoder, dynamics, decoder })
    }

    /// Encode a batch of channel-stacked contexts: (B, 3C, S, S).
    pub fn encode_batch(
        &self,
        ps: &ParamStore,
        x: ArrayView4<f64>,
    ) -> Result<(FeatureSplit, EncoderTrace), ModelError> {
        self.encoder
            .forward(ps, x, self.cfg.scene_dim(), self.cfg.agent_dim)
    }

    /// Encode a single context stack (3C, S, S).
    pub fn encode_one(
        &self,
        ps: &ParamStore,
        x: ArrayView3<f64>,
    ) -> Result<(FeatureSplit, EncoderTrace), ModelError> {
        let (c, h, w) = x.dim();
        let x4 = x.to_owned().into_shape_with_order((1, c, h, w)).unwrap();
        self.encode_batch(ps, x4.view())
    }

    /// Single dynamics step without trace bookkeeping.
    pub fn predict_agent(
        &self,
        ps: &ParamStore,
        h_a: ArrayView2<f64>,
        action: ArrayView2<f64>,
    ) -> Result<Array2<f64>, ModelError> {
        Ok(self.dynamics.step(ps, h_a, action)?.0)
    }

    /// Decode (h_s, h_a) to frames; taps are required when skips are on.
    pub fn decode(
        &self,
        ps: &ParamStore,
        h_s: ArrayView2<f64>,
        h_a: ArrayView2<f64>,
        taps: Option<&[Array4<f64>]>,
    ) -> Result<Array4<f64>, ModelError> {
        let h = FeatureSplit::concat(h_s, h_a);
        Ok(self.decoder.forward(ps, h.view(), taps)?.out)
    }

    /// Roll a single context forward through `actions` and decode every
    /// intermediate step. Output frame 0 is the zero-rollout (autoencoding)
    /// reconstruction, so the result has `actions.len() + 1` frames.
    pub fn imagine(
        &self,
        ps: &ParamStore,
        context: ArrayView3<f64>,
        actions: &[Vec<f64>],
    ) -> Result<Vec<Array3<f64>>, ModelError> {
        for a in actions {
            if a.len() != self.cfg.action_dim {
                return Err(ModelError::Input(format!(
                    "action dim {} does not match model ({})",
                    a.len(),
                    self.cfg.action_dim
                )));
            }
        }
        let (split, enc) = self.encode_one(ps, context)?;
        let taps = self.decoder.uses_skips().then(|| enc.taps());
        let mut frames = Vec::with_capacity(actions.len() + 1);
        let mut h_a = split.agent().to_owned();
        let decode_now = |h_a: &Array2<f64>| -> Result<Array3<f64>, ModelError> {
            let h = FeatureSplit::concat(split.scene(), h_a.view());
            let out = self.decoder.forward(ps, h.view(), taps)?.out;
            Ok(out.index_axis(Axis(0), 0).to_owned())
        };
        frames.push(decode_now(&h_a)?);
        for a in actions {
            let a_arr = Array2::from_shape_vec((1, a.len()), a.clone()).unwrap();
            h_a = self.dynamics.step(ps, h_a.view(), a_arr.view())?.0;
            frames.push(decode_now(&h_a)?);
        }
        Ok(frames)
    }

    /// Predict the frame k steps past the context of a single window
    /// (k = 0 reconstructs the context-time frame).
    pub fn predict_window(
        &self,
        ps: &ParamStore,
        window: &ef_data::TrainingWindow,
        k: usize,
    ) -> Result<Array3<f64>, ModelError> {
        if k > window.actions.nrows() {
            return Err(ModelError::Input(format!(
                "k = {k} exceeds window action track of {}",
                window.actions.nrows()
            )));
        }
        let actions: Vec<Vec<f64>> = (0..k)
            .map(|j| window.actions.row(j).to_vec())
            .collect();
        let frames = self.imagine(ps, window.stacked_context().view(), &actions)?;
        Ok(frames.into_iter().last().unwrap())
    }

    /// Ids of each parameter group in `ps`.
    pub fn group_ids(&self, ps: &ParamStore, prefix: &str) -> Vec<ef_nn::ParamId> {
        ps.ids_with_prefix(prefix).collect()
    }

    /// True if every parameter tensor is finite.
    pub fn params_finite(&self, ps: &ParamStore) -> bool {
        ps.ids().all(|id| ps.get(id).iter().all(|v| v.is_finite()))
    }

    pub fn num_params(&self, ps: &ParamStore) -> usize {
        ps.num_scalars()
    }
}
