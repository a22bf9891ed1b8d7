//! Episode-granular replay buffer with the two samplers.

use std::collections::VecDeque;
use std::sync::Arc;

use rand::Rng;

use crate::episode::{Episode, Frame, MaskFrame};
use crate::sample::{TrainingWindow, Transition};
use crate::DataError;

#[derive(Debug, Clone)]
pub struct BufferConfig {
    /// Capacity in episodes; eviction is oldest-first.
    pub capacity: usize,
    pub context: usize,
    pub horizon: usize,
    pub frame_h: usize,
    pub frame_w: usize,
    pub action_dim: usize,
}

impl Default for BufferConfig {
    fn default() -> Self {
        Self {
            capacity: 1000,
            context: 3,
            horizon: 10,
            frame_h: 64,
            frame_w: 64,
            action_dim: 3,
        }
    }
}

impl BufferConfig {
    /// Minimum episode length admitted to the buffer (C + H + 1).
    pub fn min_episode_len(&self) -> usize {
        self.context + self.horizon + 1
    }
}

/// Accumulates steps until `done`, then seals into an [`Episode`].
#[derive(Debug)]
pub struct EpisodeBuilder {
    id: u64,
    frames: Vec<Frame>,
    actions: Vec<Vec<f64>>,
    rewards: Vec<f64>,
    masks: Option<Vec<MaskFrame>>,
}

impl EpisodeBuilder {
    fn new(id: u64, keep_masks: bool) -> Self {
        Self {
            id,
            frames: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            masks: if keep_masks { Some(Vec::new()) } else { None },
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    fn push(
        &mut self,
        cfg: &BufferConfig,
        frame: Frame,
        action: Vec<f64>,
        reward: f64,
        mask: Option<MaskFrame>,
    ) -> Result<(), DataError> {
        if frame.h != cfg.frame_h || frame.w != cfg.frame_w {
            return Err(DataError::DimensionMismatch(format!(
                "frame {}x{}, buffer configured for {}x{}",
                frame.h, frame.w, cfg.frame_h, cfg.frame_w
            )));
        }
        if action.len() != cfg.action_dim {
            return Err(DataError::DimensionMismatch(format!(
                "action dim {}, buffer configured for {}",
                action.len(),
                cfg.action_dim
            )));
        }
        self.frames.push(frame);
        self.actions.push(action);
        self.rewards.push(reward);
        if let (Some(ms), Some(m)) = (&mut self.masks, mask) {
            ms.push(m);
        }
        Ok(())
    }

    fn seal(self, terminated: bool) -> Episode {
        Episode {
            id: self.id,
            frames: self.frames,
            actions: self.actions,
            rewards: self.rewards,
            terminated,
            masks: self.masks,
        }
    }
}

/// Bounded episode store serving both window and transition sampling.
#[derive(Debug)]
pub struct ReplayBuffer {
    cfg: BufferConfig,
    episodes: VecDeque<Arc<Episode>>,
    in_progress: Option<EpisodeBuilder>,
    next_id: u64,
    keep_masks: bool,
    total_steps: usize,
}

impl ReplayBuffer {
    pub fn new(cfg: BufferConfig) -> Self {
        Self {
            cfg,
            episodes: VecDeque::new(),
            in_progress: None,
            next_id: 0,
            keep_masks: false,
            total_steps: 0,
        }
    }

    pub fn config(&self) -> &BufferConfig {
        &self.cfg
    }

    pub fn num_episodes(&self) -> usize {
        self.episodes.len()
    }

    pub fn total_steps(&self) -> usize {
        self.total_steps
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn episodes(&self) -> impl Iterator<Item = &Arc<Episode>> {
        self.episodes.iter()
    }

    /// Record one environment step. When `done` is set the in-progress
    /// episode is sealed and admitted if it is long enough; the sealed
    /// episode (admitted or not) is returned.
    pub fn append_step(
        &mut self,
        frame: Frame,
        action: Vec<f64>,
        reward: f64,
        done: bool,
        terminated: bool,
        mask: Option<MaskFrame>,
    ) -> Result<Option<Arc<Episode>>, DataError> {
        let builder = match &mut self.in_progress {
            Some(b) => b,
            None => {
                let id = self.next_id;
                self.next_id += 1;
                self.in_progress = Some(EpisodeBuilder::new(id, self.keep_masks));
                self.in_progress.as_mut().unwrap()
            }
        };
        builder.push(&self.cfg, frame, action, reward, mask)?;
        if !done {
            return Ok(None);
        }
        let sealed = self.in_progress.take().unwrap().seal(terminated);
        Ok(Some(self.admit(sealed)))
    }

    /// Insert a sealed episode, evicting the oldest when at capacity.
    /// Episodes shorter than C + H + 1 steps are discarded with a warning.
    pub fn add_episode(&mut self, ep: Episode) -> Arc<Episode> {
        self.admit(ep)
    }

    fn admit(&mut self, ep: Episode) -> Arc<Episode> {
        let ep = Arc::new(ep);
        if ep.len() < self.cfg.min_episode_len() {
            log::warn!(
                "discarding episode {} of length {} (< C+H+1 = {})",
                ep.id,
                ep.len(),
                self.cfg.min_episode_len()
            );
            return ep;
        }
        if self.episodes.len() == self.cfg.capacity {
            if let Some(old) = self.episodes.pop_front() {
                self.total_steps -= old.len();
            }
        }
        self.total_steps += ep.len();
        self.episodes.push_back(ep.clone());
        ep
    }

    fn pick_episode(&self, rng: &mut impl Rng) -> Result<&Arc<Episode>, DataError> {
        if self.episodes.is_empty() {
            return Err(DataError::EmptyBuffer);
        }
        let i = rng.random_range(0..self.episodes.len());
        Ok(&self.episodes[i])
    }

    /// Draw one context/horizon window: episode uniform over the buffer,
    /// start uniform over the episode's valid positions.
    pub fn sample_window(&self, rng: &mut impl Rng) -> Result<TrainingWindow, DataError> {
        let ep = self.pick_episode(rng)?;
        let starts = TrainingWindow::num_starts(ep, self.cfg.context, self.cfg.horizon);
        debug_assert!(starts > 0, "admitted episodes are always long enough");
        let start = rng.random_range(0..starts);
        TrainingWindow::from_episode(ep, self.cfg.context, self.cfg.horizon, start)
    }

    pub fn sample_windows(&self, batch: usize, rng: &mut impl Rng) -> Result<Vec<TrainingWindow>, DataError> {
        (0..batch).map(|_| self.sample_window(rng)).collect()
    }

    /// Draw one n-step transition.
    pub fn sample_transition(&self, n: usize, rng: &mut impl Rng) -> Result<Transition, DataError> {
        if self.episodes.is_empty() {
            return Err(DataError::EmptyBuffer);
        }
        // Reject episodes with no valid starts (possible for truncated
        // episodes when n is close to the admission length).
        for _ in 0..64 {
            let ep = self.pick_episode(rng)?;
            let starts = Transition::num_starts(ep, n);
            if starts == 0 {
                continue;
            }
            let start = rng.random_range(0..starts);
            return Transition::from_episode(ep, self.cfg.context, n, start);
        }
        Err(DataError::NoQualifyingEpisode(format!("n = {n}")))
    }

    pub fn sample_transitions(
        &self,
        batch: usize,
        n: usize,
        rng: &mut impl Rng,
    ) -> Result<Vec<Transition>, DataError> {
        (0..batch).map(|_| self.sample_transition(n, rng)).collect()
    }

    /// Enable mask retention on collected episodes (evaluation buffers only).
    pub fn set_keep_masks(&mut self, keep: bool) {
        self.keep_masks = keep;
    }
}
