//! Episode storage, window and n-step transition sampling, and the on-disk
//! episode archive.
//!
//! Frames are stored as 8-bit RGB and converted to [0, 1] floats at sampling
//! time. One buffer serves both the visuomotor-prediction sampler (context +
//! horizon windows) and the critic sampler (n-step transitions), so both
//! objectives train on the same experience.
//!
//! Indexing convention used throughout: `actions[t]` is the action commanded
//! while observing `frames[t]`; executing it yields `frames[t + 1]` and
//! `rewards[t]`. The observation produced by the final executed action is not
//! stored.

pub mod archive;
pub mod buffer;
pub mod episode;
pub mod sample;

pub use archive::{read_archive, ArchiveMeta, ArchiveWriter};
pub use buffer::{BufferConfig, EpisodeBuilder, ReplayBuffer};
pub use episode::{Episode, Frame, MaskFrame, MASK_AGENT, MASK_DISTRACTOR, MASK_TOOL};
pub use sample::{Transition, TrainingWindow};

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("replay buffer is empty")]
    EmptyBuffer,
    #[error("no episode long enough for the requested sample ({0})")]
    NoQualifyingEpisode(String),
    #[error("value out of range: {0}")]
    OutOfRange(String),
    #[error("archive error in {path}: {msg}")]
    Archive { path: String, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
