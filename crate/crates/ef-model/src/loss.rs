//! The visuomotor reconstruction objective.
//!
//! For each window a reconstruction step k is drawn uniformly from
//! {1, ..., H}. The agent slice is rolled forward k steps through the
//! dynamics block while the scene slice is reused as encoded from the
//! context; the decoder output is penalized with mean squared pixel error
//! against the target frame at step k.

use ef_data::TrainingWindow;
use ef_nn::{Grads, ParamStore};
use ndarray::{s, Array2, Array3, Array4, Axis};
use rand::Rng;

use crate::decoder::DecoderTrace;
use crate::dynamics::RolloutTrace;
use crate::encoder::EncoderTrace;
use crate::model::VisuomotorModel;
use crate::split::FeatureSplit;
use crate::ModelError;

#[derive(Debug, Clone)]
pub struct EfDiagnostics {
    pub loss: f64,
    /// Reconstruction step per batch element.
    pub ks: Vec<usize>,
    pub per_element: Vec<f64>,
    /// Batch-mean squared error per pixel (3, S, S), when requested.
    pub error_map: Option<Array3<f64>>,
}

/// Everything the backward pass needs.
pub struct EfTrace {
    pub enc: EncoderTrace,
    pub split: FeatureSplit,
    pub rollout: RolloutTrace,
    pub dec: DecoderTrace,
    pub ks: Vec<usize>,
    pub targets: Array4<f64>,
}

/// Gradients with respect to non-parameter inputs, returned for property
/// checks; training only consumes the parameter gradients.
pub struct EfInputGrads {
    pub context: Array4<f64>,
    pub actions: Array3<f64>,
}

/// Channel-stack each window's context into one encoder input batch.
pub fn stack_contexts(windows: &[TrainingWindow]) -> Array4<f64> {
    let first = windows[0].stacked_context();
    let (c, h, w) = first.dim();
    let mut out = Array4::zeros((windows.len(), c, h, w));
    out.index_axis_mut(Axis(0), 0).assign(&first);
    for (i, win) in windows.iter().enumerate().skip(1) {
        out.index_axis_mut(Axis(0), i).assign(&win.stacked_context());
    }
    out
}

/// Batched action tracks: (B, H, A).
pub fn stack_actions(windows: &[TrainingWindow]) -> Array3<f64> {
    let (h, a) = windows[0].actions.dim();
    let mut out = Array3::zeros((windows.len(), h, a));
    for (i, win) in windows.iter().enumerate() {
        out.slice_mut(s![i, .., ..]).assign(&win.actions);
    }
    out
}

pub fn ef_forward(
    model: &VisuomotorModel,
    ps: &ParamStore,
    windows: &[TrainingWindow],
    rng: &mut impl Rng,
    with_error_map: bool,
) -> Result<(EfDiagnostics, EfTrace), ModelError> {
    if windows.is_empty() {
        return Err(ModelError::Input("empty window batch".into()));
    }
    let horizon = model.cfg.horizon;
    let ks: Vec<usize> = (0..windows.len())
        .map(|_| rng.random_range(1..=horizon))
        .collect();
    ef_forward_at(model, ps, windows, &ks, with_error_map)
}

/// Deterministic variant with caller-chosen reconstruction steps.
pub fn ef_forward_at(
    model: &VisuomotorModel,
    ps: &ParamStore,
    windows: &[TrainingWindow],
    ks: &[usize],
    with_error_map: bool,
) -> Result<(EfDiagnostics, EfTrace), ModelError> {
    let ctx = stack_contexts(windows);
    let actions = stack_actions(windows);
    let (split, enc_trace) = model.encode_batch(ps, ctx.view())?;

    let k_max = ks.iter().copied().max().unwrap();
    let rollout = model.dynamics.rollout(ps, split.agent(), &actions, k_max)?;

    // gather each element's rolled-forward agent features and target frame
    let batch = windows.len();
    let l = model.cfg.agent_dim;
    let size = model.cfg.frame_size;
    let mut h_a_k = Array2::zeros((batch, l));
    let mut targets = Array4::zeros((batch, 3, size, size));
    for (i, &k) in ks.iter().enumerate() {
        h_a_k.row_mut(i).assign(&rollout.states[k].row(i));
        targets
            .index_axis_mut(Axis(0), i)
            .assign(&windows[i].targets.index_axis(Axis(0), k - 1));
    }

    let dec_in = FeatureSplit::concat(split.scene(), h_a_k.view());
    let taps = model.decoder.uses_skips().then(|| enc_trace.taps());
    let dec = model.decoder.forward(ps, dec_in.view(), taps)?;

    let per_px = 1.0 / (3 * size * size) as f64;
    let mut per_element = Vec::with_capacity(batch);
    for i in 0..batch {
        let diff = &dec.out.index_axis(Axis(0), i) - &targets.index_axis(Axis(0), i);
        per_element.push(diff.iter().map(|v| v * v).sum::<f64>() * per_px);
    }
    let loss = per_element.iter().sum::<f64>() / batch as f64;
    let error_map = with_error_map.then(|| {
        let mut m = Array3::zeros((3, size, size));
        for i in 0..batch {
            let diff = &dec.out.index_axis(Axis(0), i) - &targets.index_axis(Axis(0), i);
            m += &diff.mapv(|v| v * v);
        }
        m / batch as f64
    });

    Ok((
        EfDiagnostics { loss, ks: ks.to_vec(), per_element, error_map },
        EfTrace { enc: enc_trace, split, rollout, dec, ks: ks.to_vec(), targets },
    ))
}

/// Accumulate `scale` times the loss gradient into `gr`.
pub fn ef_backward(
    model: &VisuomotorModel,
    ps: &ParamStore,
    trace: &EfTrace,
    scale: f64,
    gr: &mut Grads,
) -> EfInputGrads {
    let batch = trace.ks.len();
    let size = model.cfg.frame_size;
    let m = model.cfg.scene_dim();
    let norm = 2.0 * scale / (batch * 3 * size * size) as f64;

    let g_out = (&trace.dec.out - &trace.targets).mapv(|v| v * norm);
    let (g_dec_h, tap_grads) = model.decoder.backward(ps, &trace.dec, &g_out, gr);

    let g_hs = g_dec_h.slice(s![.., ..m]);
    let g_hak = g_dec_h.slice(s![.., m..]);
    let (mut g_ha0, g_actions) =
        model
            .dynamics
            .rollout_backward(ps, &trace.rollout, &trace.ks, g_hak, gr);
    if model.cfg.detach_agent_rollout {
        g_ha0.fill(0.0);
    }
    let g_h = FeatureSplit::concat(g_hs, g_ha0.view());
    let g_context = model
        .encoder
        .backward(ps, &trace.enc, &g_h, tap_grads.as_deref(), gr);
    EfInputGrads { context: g_context, actions: g_actions }
}
