//! The scene/agent partition of the encoder output.

use ndarray::{s, Array2, ArrayView2};

/// Batched feature vectors h with contiguous complementary slices:
/// columns [0, m) are the scene features h_s, columns [m, n) the agent
/// features h_a.
#[derive(Debug, Clone)]
pub struct FeatureSplit {
    pub h: Array2<f64>,
    pub scene_dim: usize,
    pub agent_dim: usize,
}

impl FeatureSplit {
    pub fn new(h: Array2<f64>, scene_dim: usize, agent_dim: usize) -> Self {
        assert_eq!(h.ncols(), scene_dim + agent_dim, "n = m + l");
        Self { h, scene_dim, agent_dim }
    }

    pub fn feat_dim(&self) -> usize {
        self.scene_dim + self.agent_dim
    }

    pub fn batch(&self) -> usize {
        self.h.nrows()
    }

    /// Scene slice h_s: (B, m).
    pub fn scene(&self) -> ArrayView2<'_, f64> {
        self.h.slice(s![.., ..self.scene_dim])
    }

    /// Agent slice h_a: (B, l).
    pub fn agent(&self) -> ArrayView2<'_, f64> {
        self.h.slice(s![.., self.scene_dim..])
    }

    /// Reassemble a full-width gradient (or feature) from per-slice parts.
    pub fn concat(scene: ArrayView2<f64>, agent: ArrayView2<f64>) -> Array2<f64> {
        let b = scene.nrows();
        let (m, l) = (scene.ncols(), agent.ncols());
        let mut out = Array2::zeros((b, m + l));
        out.slice_mut(s![.., ..m]).assign(&scene);
        out.slice_mut(s![.., m..]).assign(&agent);
        out
    }
}
