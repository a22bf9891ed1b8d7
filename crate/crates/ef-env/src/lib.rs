//! Desk-scale planar-arm environment rendered to RGB.
//!
//! A two-link kinematic arm moves over a static background while distractor
//! balls follow scripted constant-velocity bounces that never depend on the
//! agent's actions. A graspable stick can be rigidly attached to the end
//! effector. Rendering is flat-shaded with anti-aliasing off, so the
//! per-pixel ground-truth masks in the observation info are exact; they are
//! an evaluation-only channel and must never feed training.

pub mod arm;
pub mod env;
pub mod render;
pub mod scripted;

pub use arm::{forward_kinematics, inverse_kinematics, wrap_angle};
pub use env::{ArmWorld, ArmWorldState, Distractor, EnvConfig, EnvObservation, StepInfo, Task, Tool};
pub use scripted::{scripted_dataset, ScriptedPolicy};

#[derive(Debug, thiserror::Error)]
pub enum EnvError {
    #[error("action has dimension {got}, environment expects {expected}")]
    ActionDim { expected: usize, got: usize },
    #[error("unreachable target ({0}, {1})")]
    Unreachable(f64, f64),
    #[error(transparent)]
    Data(#[from] ef_data::DataError),
}
