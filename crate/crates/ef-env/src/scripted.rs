//! Scripted data collection for offline predictor training.

use std::path::Path;

use ef_data::{ArchiveWriter, Episode, Frame, MaskFrame};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::env::{ArmWorld, EnvConfig};
use crate::EnvError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScriptedPolicy {
    /// Independent ±1 choices per component per step.
    RandomBabble,
    /// Per-episode random sinusoids; actions vary smoothly.
    SmoothSinusoid,
}

struct Sinusoid {
    freq: Vec<f64>,
    phase: Vec<f64>,
}

impl Sinusoid {
    fn sample(rng: &mut impl Rng, dim: usize) -> Self {
        Self {
            freq: (0..dim).map(|_| rng.random_range(0.02..0.06)).collect(),
            phase: (0..dim)
                .map(|_| rng.random_range(0.0..2.0 * std::f64::consts::PI))
                .collect(),
        }
    }

    fn action(&self, t: usize) -> Vec<f64> {
        self.freq
            .iter()
            .zip(&self.phase)
            .map(|(&f, &p)| (2.0 * std::f64::consts::PI * f * t as f64 + p).sin())
            .collect()
    }

    /// Bound on |a(t+1) - a(t)| per component.
    fn smoothness_bound(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.freq.iter().copied().fold(0.0, f64::max)
    }
}

/// Largest per-step action change the sinusoid policy can produce with the
/// frequency range above.
pub const SINUSOID_SMOOTHNESS_BOUND: f64 = 2.0 * std::f64::consts::PI * 0.06;

/// Collect `num_episodes` fixed-length episodes under a scripted policy and
/// write them (with ground-truth masks) as an archive under `out`.
///
/// Episodes run the full configured length: success does not cut collection
/// short, so the dataset has uniform shape.
pub fn scripted_dataset(
    cfg: &EnvConfig,
    num_episodes: usize,
    policy: ScriptedPolicy,
    seed: u64,
    out: impl AsRef<Path>,
) -> Result<(), EnvError> {
    let mut env_cfg = cfg.clone();
    env_cfg.terminate_on_success = false;
    let mut env = ArmWorld::new(env_cfg.clone(), seed);
    let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0x5eed_da7a);

    let mut writer = ArchiveWriter::create(
        out,
        env_cfg.frame_size,
        env_cfg.frame_size,
        env_cfg.action_dim(),
        true,
    )?;

    for i in 0..num_episodes {
        let ep = collect_episode(&mut env, policy, &mut rng, i as u64)?;
        writer.add(&ep)?;
    }
    writer.finish()?;
    Ok(())
}

/// Roll one fixed-length scripted episode.
pub fn collect_episode(
    env: &mut ArmWorld,
    policy: ScriptedPolicy,
    rng: &mut impl Rng,
    id: u64,
) -> Result<Episode, EnvError> {
    let mut obs = env.reset();
    let dim = env.action_dim();
    let sinusoid = Sinusoid::sample(rng, dim);

    let mut frames: Vec<Frame> = Vec::new();
    let mut masks: Vec<MaskFrame> = Vec::new();
    let mut actions: Vec<Vec<f64>> = Vec::new();
    let mut rewards: Vec<f64> = Vec::new();

    for t in 0..env.cfg.episode_len {
        let action: Vec<f64> = match policy {
            ScriptedPolicy::RandomBabble => (0..dim)
                .map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 })
                .collect(),
            ScriptedPolicy::SmoothSinusoid => sinusoid.action(t),
        };
        frames.push(obs.frame.clone());
        masks.push(obs.masks.clone());
        actions.push(action.clone());
        let next = env.step(&action)?;
        rewards.push(next.reward);
        obs = next;
    }

    Ok(Episode {
        id,
        frames,
        actions,
        rewards,
        terminated: false,
        masks: Some(masks),
    })
}
