//! Window and transition views cut from episodes.

use ndarray::{Array2, Array3, Array4, Axis};

use crate::episode::Episode;
use crate::DataError;

/// Context/horizon slice of one episode.
///
/// With window start `s`, context frames are `frames[s ..= s+C-1]`, targets
/// are `frames[s+C ..= s+C+H-1]`, and the action track holds the `H` actions
/// that produce the target frames: `actions[s+C-1 ..= s+C+H-2]`. Valid starts
/// are `0 ..= len-1-(C+H)`.
#[derive(Debug, Clone)]
pub struct TrainingWindow {
    /// (C, 3, h, w), floats in [0, 1].
    pub context: Array4<f64>,
    /// (H, A).
    pub actions: Array2<f64>,
    /// (H, 3, h, w), floats in [0, 1].
    pub targets: Array4<f64>,
    pub window_start: usize,
    pub episode_id: u64,
}

impl TrainingWindow {
    /// Cut a window at `start`. Fails if the window would cross the episode
    /// end.
    pub fn from_episode(ep: &Episode, context: usize, horizon: usize, start: usize) -> Result<Self, DataError> {
        let needed = context + horizon;
        if ep.len() < needed + 1 || start > ep.len() - 1 - needed {
            return Err(DataError::OutOfRange(format!(
                "window start {start} with C={context} H={horizon} in episode of length {}",
                ep.len()
            )));
        }
        let (h, w) = (ep.frames[0].h, ep.frames[0].w);
        let a_dim = ep.action_dim();

        let mut ctx = Array4::zeros((context, 3, h, w));
        for (i, f) in ep.frames[start..start + context].iter().enumerate() {
            ctx.index_axis_mut(Axis(0), i).assign(&f.to_chw());
        }
        let mut tgt = Array4::zeros((horizon, 3, h, w));
        for (i, f) in ep.frames[start + context..start + context + horizon].iter().enumerate() {
            tgt.index_axis_mut(Axis(0), i).assign(&f.to_chw());
        }
        let mut act = Array2::zeros((horizon, a_dim));
        for (i, a) in ep.actions[start + context - 1..start + context + horizon - 1]
            .iter()
            .enumerate()
        {
            for (j, &v) in a.iter().enumerate() {
                act[[i, j]] = v;
            }
        }
        Ok(Self {
            context: ctx,
            actions: act,
            targets: tgt,
            window_start: start,
            episode_id: ep.id,
        })
    }

    /// Number of valid window starts in `ep`, or 0 if the episode is too
    /// short.
    pub fn num_starts(ep: &Episode, context: usize, horizon: usize) -> usize {
        let needed = context + horizon + 1;
        if ep.len() < needed {
            0
        } else {
            ep.len() - needed + 1
        }
    }

    /// Context frames channel-concatenated into a single (3*C, h, w) array,
    /// the encoder's input layout.
    pub fn stacked_context(&self) -> Array3<f64> {
        let (c, ch, h, w) = self.context.dim();
        let mut out = Array3::zeros((c * ch, h, w));
        for i in 0..c {
            for j in 0..ch {
                out.index_axis_mut(Axis(0), i * ch + j)
                    .assign(&self.context.index_axis(Axis(0), i).index_axis(Axis(0), j));
            }
        }
        out
    }
}

/// One n-step transition.
#[derive(Debug, Clone)]
pub struct Transition {
    /// Frame stack at t: (3*C, h, w); early frames are repeated at episode
    /// start.
    pub obs: Array3<f64>,
    pub action: Vec<f64>,
    /// Exactly n entries; zero-filled past termination.
    pub rewards: Vec<f64>,
    /// Frame stack at t+n, clamped to the final stored frame when the
    /// episode terminated inside the span.
    pub next_obs: Array3<f64>,
    /// 0 if the episode terminated inside the n-step span, else 1.
    pub mask: f64,
    pub start: usize,
    pub episode_id: u64,
}

/// Stack the `context` frames ending at `t` (repeating frame 0 before the
/// episode start) into (3*C, h, w).
pub fn frame_stack(ep: &Episode, t: usize, context: usize) -> Array3<f64> {
    let (h, w) = (ep.frames[0].h, ep.frames[0].w);
    let mut out = Array3::zeros((3 * context, h, w));
    for i in 0..context {
        // frame index for stack slot i (oldest first)
        let offset = (context - 1 - i) as isize;
        let idx = (t as isize - offset).max(0) as usize;
        let chw = ep.frames[idx.min(ep.len() - 1)].to_chw();
        for c in 0..3 {
            out.index_axis_mut(Axis(0), i * 3 + c)
                .assign(&chw.index_axis(Axis(0), c));
        }
    }
    out
}

impl Transition {
    /// Cut an n-step transition starting at `start`.
    ///
    /// For terminated episodes any `start < len` is valid: rewards past the
    /// final executed action are zero and the bootstrap mask is zero. For
    /// truncated episodes the span must stay inside stored frames
    /// (`start + n <= len - 1`).
    pub fn from_episode(
        ep: &Episode,
        context: usize,
        n: usize,
        start: usize,
    ) -> Result<Self, DataError> {
        let len = ep.len();
        let valid = if ep.terminated {
            start < len
        } else {
            start + n <= len - 1
        };
        if n == 0 || !valid {
            return Err(DataError::OutOfRange(format!(
                "transition start {start}, n={n}, episode length {len}, terminated {}",
                ep.terminated
            )));
        }
        let mut rewards = vec![0.0; n];
        for i in 0..n {
            if start + i < len {
                rewards[i] = ep.rewards[start + i];
            }
        }
        let crosses_end = start + n >= len;
        let mask = if ep.terminated && crosses_end { 0.0 } else { 1.0 };
        let next_t = (start + n).min(len - 1);
        Ok(Self {
            obs: frame_stack(ep, start, context),
            action: ep.actions[start].clone(),
            rewards,
            next_obs: frame_stack(ep, next_t, context),
            mask,
            start,
            episode_id: ep.id,
        })
    }

    /// Number of valid transition starts in `ep`.
    pub fn num_starts(ep: &Episode, n: usize) -> usize {
        if ep.terminated {
            ep.len()
        } else if ep.len() > n {
            ep.len() - n
        } else {
            0
        }
    }
}
