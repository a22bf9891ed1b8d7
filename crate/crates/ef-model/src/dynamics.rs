//! Action-conditioned recurrent block over the agent feature slice.
//!
//! A layer-normalized MLP with Mish activations maps (h_a, a) to the next
//! h_a; multi-step prediction is iterated application over the action
//! sequence.

use ef_nn::{mish, mish_grad, Grads, LayerNorm, Linear, ParamStore};
use ndarray::{s, Array2, Array3, ArrayView2, Axis};
use rand::Rng;

use crate::config::ModelConfig;
use crate::ModelError;

#[derive(Debug, Clone)]
pub struct AgentDynamics {
    lins: Vec<Linear>,
    norms: Vec<LayerNorm>,
    pub agent_dim: usize,
    pub action_dim: usize,
}

/// Per-step intermediates: inputs to each linear, layer-norm and mish stage.
#[derive(Debug)]
pub struct DynStepTrace {
    lin_in: Vec<Array2<f64>>,
    ln_in: Vec<Array2<f64>>,
    mish_in: Vec<Array2<f64>>,
}

/// Forward rollout bookkeeping: one trace per step plus every intermediate
/// agent state (index 0 is the context-time h_a).
#[derive(Debug)]
pub struct RolloutTrace {
    pub steps: Vec<DynStepTrace>,
    pub states: Vec<Array2<f64>>,
}

impl AgentDynamics {
    pub fn new(cfg: &ModelConfig, ps: &mut ParamStore, rng: &mut impl Rng) -> Self {
        let (l, a) = (cfg.agent_dim, cfg.action_dim);
        let mut lins = Vec::with_capacity(cfg.dyn_layers + 1);
        let mut norms = Vec::with_capacity(cfg.dyn_layers);
        let mut in_dim = l + a;
        for j in 0..cfg.dyn_layers {
            lins.push(Linear::new(ps, rng, &format!("dyn.fc{j}"), in_dim, cfg.dyn_hidden));
            norms.push(LayerNorm::new(ps, &format!("dyn.ln{j}"), cfg.dyn_hidden));
            in_dim = cfg.dyn_hidden;
        }
        lins.push(Linear::new(ps, rng, "dyn.out", in_dim, l));
        Self { lins, norms, agent_dim: l, action_dim: a }
    }

    pub fn check_dims(&self, h_a: &ArrayView2<f64>, action: &ArrayView2<f64>) -> Result<(), ModelError> {
        if h_a.ncols() != self.agent_dim || action.ncols() != self.action_dim {
            return Err(ModelError::Input(format!(
                "dynamics expects h_a dim {} and action dim {}, got {} and {}",
                self.agent_dim,
                self.action_dim,
                h_a.ncols(),
                action.ncols()
            )));
        }
        Ok(())
    }

    /// One prediction step: (h_a, a) -> next h_a.
    pub fn step(
        &self,
        ps: &ParamStore,
        h_a: ArrayView2<f64>,
        action: ArrayView2<f64>,
    ) -> Result<(Array2<f64>, DynStepTrace), ModelError> {
        self.check_dims(&h_a, &action)?;
        let b = h_a.nrows();
        let mut x = Array2::zeros((b, self.agent_dim + self.action_dim));
        x.slice_mut(s![.., ..self.agent_dim]).assign(&h_a);
        x.slice_mut(s![.., self.agent_dim..]).assign(&action);

        let mut lin_in = Vec::new();
        let mut ln_in = Vec::new();
        let mut mish_in = Vec::new();
        for (lin, norm) in self.lins.iter().zip(&self.norms) {
            lin_in.push(x.clone());
            let z = lin.forward(ps, x.view());
            ln_in.push(z.clone());
            let zn = norm.forward(ps, z.view());
            mish_in.push(zn.clone());
            x = mish(&zn);
        }
        lin_in.push(x.clone());
        let out = self.lins.last().unwrap().forward(ps, x.view());
        Ok((out, DynStepTrace { lin_in, ln_in, mish_in }))
    }

    /// Backward through one step: returns (g_h_a, g_action).
    pub fn step_backward(
        &self,
        ps: &ParamStore,
        trace: &DynStepTrace,
        g_out: ArrayView2<f64>,
        gr: &mut Grads,
    ) -> (Array2<f64>, Array2<f64>) {
        let last = self.lins.len() - 1;
        let mut g = self.lins[last].backward(ps, trace.lin_in[last].view(), g_out, gr);
        for j in (0..self.norms.len()).rev() {
            let g_zn = mish_grad(&trace.mish_in[j], &g);
            let g_z = self.norms[j].backward(ps, trace.ln_in[j].view(), g_zn.view(), gr);
            g = self.lins[j].backward(ps, trace.lin_in[j].view(), g_z.view(), gr);
        }
        let g_ha = g.slice(s![.., ..self.agent_dim]).to_owned();
        let g_action = g.slice(s![.., self.agent_dim..]).to_owned();
        (g_ha, g_action)
    }

    /// Roll the batch forward `steps` times, feeding actions[:, j, :] at step
    /// j. Returns all intermediate states.
    pub fn rollout(
        &self,
        ps: &ParamStore,
        h_a0: ArrayView2<f64>,
        actions: &Array3<f64>,
        steps: usize,
    ) -> Result<RolloutTrace, ModelError> {
        assert!(steps <= actions.dim().1, "rollout longer than action track");
        let mut states = vec![h_a0.to_owned()];
        let mut traces = Vec::with_capacity(steps);
        for j in 0..steps {
            let a_j = actions.index_axis(Axis(1), j);
            let (next, tr) =
                self.step(ps, states[j].view(), a_j)?;
            states.push(next);
            traces.push(tr);
        }
        Ok(RolloutTrace { steps: traces, states })
    }

    /// Backward through a rollout where element i receives gradient
    /// `g_at_k.row(i)` at its own step `ks[i]` (0 means the context state
    /// itself). Returns (g_h_a0, g_actions).
    pub fn rollout_backward(
        &self,
        ps: &ParamStore,
        trace: &RolloutTrace,
        ks: &[usize],
        g_at_k: ArrayView2<f64>,
        gr: &mut Grads,
    ) -> (Array2<f64>, Array3<f64>) {
        let steps = trace.steps.len();
        let b = g_at_k.nrows();
        let mut g_actions = Array3::zeros((b, steps, self.action_dim));
        let mut g_run: Array2<f64> = Array2::zeros((b, self.agent_dim));
        for (i, &k) in ks.iter().enumerate() {
            if k == steps {
                g_run.row_mut(i).assign(&g_at_k.row(i));
            }
        }
        for j in (0..steps).rev() {
            let (g_prev, g_a) = self.step_backward(ps, &trace.steps[j], g_run.view(), gr);
            g_run = g_prev;
            g_actions.index_axis_mut(Axis(1), j).assign(&g_a);
            // inject gradient for elements whose target step is j
            for (i, &k) in ks.iter().enumerate() {
                if k == j {
                    let inj = g_at_k.row(i).to_owned();
                    let mut row = g_run.row_mut(i);
                    row += &inj;
                }
            }
        }
        (g_run, g_actions)
    }
}
