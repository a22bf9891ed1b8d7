//! The environment proper: state, reset distribution, dynamics and reward.

use ef_data::{Frame, MaskFrame, MASK_AGENT, MASK_DISTRACTOR, MASK_TOOL};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::arm::{dist, forward_kinematics, wrap_angle};
use crate::render::{self, Canvas};
use crate::EnvError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    /// Bring the end effector to the goal.
    Reach,
    /// Grasp the stick, then touch the goal with the stick tip.
    ToolReach,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    pub task: Task,
    pub frame_size: usize,
    pub episode_len: usize,
    pub num_distractors: usize,
    pub distractor_speed: f64,
    pub distractor_radius: f64,
    pub link_lengths: (f64, f64),
    /// Joint speed at |action| = 1, radians per step.
    pub max_joint_speed: f64,
    pub arm_half_width: f64,
    pub grasp_radius: f64,
    pub success_radius: f64,
    pub success_bonus: f64,
    /// End the episode as soon as the goal is reached.
    pub terminate_on_success: bool,
    /// Probability that tool-reach episodes start with the stick already in
    /// the gripper (gives scripted data attached segments and shortens the
    /// exploration horizon).
    pub tool_attached_at_reset: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            task: Task::Reach,
            frame_size: 64,
            episode_len: 50,
            num_distractors: 2,
            distractor_speed: 0.025,
            distractor_radius: 0.055,
            link_lengths: (0.26, 0.20),
            max_joint_speed: 0.25,
            arm_half_width: 0.035,
            grasp_radius: 0.07,
            success_radius: 0.05,
            success_bonus: 1.0,
            terminate_on_success: true,
            tool_attached_at_reset: 0.5,
        }
    }
}

impl EnvConfig {
    /// Two joint velocities plus the gripper channel.
    pub fn action_dim(&self) -> usize {
        3
    }

    pub fn anchor(&self) -> (f64, f64) {
        (0.5, 0.5)
    }
}

#[derive(Debug, Clone)]
pub struct Distractor {
    pub pos: (f64, f64),
    pub vel: (f64, f64),
    pub radius: f64,
    pub color: render::Color,
}

#[derive(Debug, Clone)]
pub struct Tool {
    /// Grip end when unattached (world coords).
    pub pos: (f64, f64),
    /// Orientation when unattached.
    pub angle: f64,
    pub length: f64,
    pub attached: bool,
}

#[derive(Debug, Clone)]
pub struct ArmWorldState {
    pub joint_angles: (f64, f64),
    pub joint_velocities: (f64, f64),
    pub gripper_closed: bool,
    pub distractors: Vec<Distractor>,
    pub tool: Option<Tool>,
    pub goal: (f64, f64),
    pub step_count: usize,
}

#[derive(Debug, Clone, Default)]
pub struct StepInfo {
    pub success: bool,
    pub action_clipped: bool,
    /// Distance of the task-relevant point (effector or tool tip) to goal.
    pub goal_distance: f64,
    pub tool_attached: bool,
}

#[derive(Debug, Clone)]
pub struct EnvObservation {
    pub frame: Frame,
    pub reward: f64,
    pub done: bool,
    /// Termination (success) rather than time limit.
    pub terminated: bool,
    /// Evaluation-only ground truth.
    pub masks: MaskFrame,
    pub info: StepInfo,
}

#[derive(Clone)]
pub struct ArmWorld {
    pub cfg: EnvConfig,
    state: ArmWorldState,
    rng: ChaCha12Rng,
    canvas: Canvas,
}

impl ArmWorld {
    pub fn new(cfg: EnvConfig, seed: u64) -> Self {
        let canvas = Canvas::new(cfg.frame_size);
        let mut world = Self {
            state: ArmWorldState {
                joint_angles: (0.0, 0.0),
                joint_velocities: (0.0, 0.0),
                gripper_closed: false,
                distractors: Vec::new(),
                tool: None,
                goal: (0.25, 0.25),
                step_count: 0,
            },
            rng: ChaCha12Rng::seed_from_u64(seed),
            cfg,
            canvas,
        };
        world.reset();
        world
    }

    pub fn state(&self) -> &ArmWorldState {
        &self.state
    }

    pub fn action_dim(&self) -> usize {
        self.cfg.action_dim()
    }

    /// Reseed and reset: two calls with the same seed produce identical
    /// episodes under identical action sequences.
    pub fn reset_seeded(&mut self, seed: u64) -> EnvObservation {
        self.rng = ChaCha12Rng::seed_from_u64(seed);
        self.reset()
    }

    pub fn reset(&mut self) -> EnvObservation {
        let cfg = self.cfg.clone();
        let anchor = cfg.anchor();
        let t1 = self.rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let t2 = self.rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        self.state.joint_angles = (wrap_angle(t1), wrap_angle(t2));
        self.state.joint_velocities = (0.0, 0.0);
        self.state.gripper_closed = false;
        self.state.step_count = 0;

        // goal somewhere comfortably inside the workspace annulus
        let reach_max = cfg.link_lengths.0 + cfg.link_lengths.1 - 0.04;
        let reach_min = (cfg.link_lengths.0 - cfg.link_lengths.1).abs() + 0.06;
        let goal_r = self.rng.random_range(reach_min..reach_max);
        let goal_a = self.rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        self.state.goal = (anchor.0 + goal_r * goal_a.cos(), anchor.1 + goal_r * goal_a.sin());

        self.state.tool = match cfg.task {
            Task::Reach => None,
            Task::ToolReach => {
                let attached = self.rng.random_bool(cfg.tool_attached_at_reset);
                let (pos, angle) = if attached {
                    // pose is recomputed from the effector every render
                    ((0.0, 0.0), 0.0)
                } else {
                    // resting pose within the arm's reach, away from the goal
                    loop {
                        let r = self.rng.random_range(reach_min..reach_max);
                        let a = self.rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
                        let p = (anchor.0 + r * a.cos(), anchor.1 + r * a.sin());
                        if dist(p, self.state.goal) > 0.18 {
                            break (p, self.rng.random_range(-std::f64::consts::PI..std::f64::consts::PI));
                        }
                    }
                };
                Some(Tool { pos, angle, length: 0.20, attached })
            }
        };
        if self.state.tool.as_ref().is_some_and(|t| t.attached) {
            self.state.gripper_closed = true;
        }

        // distractors: non-overlapping with the arm (rejection on distance
        // to both links), inside the walls
        let (elbow, tip) = self.fk();
        let segs = [(anchor, elbow), (elbow, tip)];
        self.state.distractors.clear();
        for i in 0..cfg.num_distractors {
            let margin = cfg.distractor_radius + 0.01;
            let clearance = cfg.distractor_radius + cfg.arm_half_width + 0.04;
            let pos = loop {
                let p = (
                    self.rng.random_range(margin..1.0 - margin),
                    self.rng.random_range(margin..1.0 - margin),
                );
                let clear = segs.iter().all(|&(a, b)| segment_dist(p, a, b) > clearance)
                    && dist(p, self.state.goal) > clearance;
                if clear {
                    break p;
                }
            };
            let dir = self.rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            self.state.distractors.push(Distractor {
                pos,
                vel: (cfg.distractor_speed * dir.cos(), cfg.distractor_speed * dir.sin()),
                radius: cfg.distractor_radius,
                color: render::DISTRACTOR_COLORS[i % render::DISTRACTOR_COLORS.len()],
            });
        }

        self.observe(0.0, false, false, StepInfo::default())
    }

    fn fk(&self) -> ((f64, f64), (f64, f64)) {
        forward_kinematics(
            self.cfg.anchor(),
            self.cfg.link_lengths,
            self.state.joint_angles.0,
            self.state.joint_angles.1,
        )
    }

    /// Tool grip and tip in world coordinates given the current state.
    fn tool_pose(&self) -> Option<((f64, f64), (f64, f64))> {
        let tool = self.state.tool.as_ref()?;
        if tool.attached {
            let (_, tip) = self.fk();
            let dir = self.state.joint_angles.0 + self.state.joint_angles.1;
            Some((
                tip,
                (tip.0 + tool.length * dir.cos(), tip.1 + tool.length * dir.sin()),
            ))
        } else {
            Some((
                tool.pos,
                (
                    tool.pos.0 + tool.length * tool.angle.cos(),
                    tool.pos.1 + tool.length * tool.angle.sin(),
                ),
            ))
        }
    }

    /// Advance one step. Out-of-range action components are clipped and
    /// flagged in the returned info.
    pub fn step(&mut self, action: &[f64]) -> Result<EnvObservation, EnvError> {
        if action.len() != self.cfg.action_dim() {
            return Err(EnvError::ActionDim { expected: self.cfg.action_dim(), got: action.len() });
        }
        let mut clipped = false;
        let mut a = [0.0f64; 3];
        for (i, &v) in action.iter().enumerate() {
            let c = v.clamp(-1.0, 1.0);
            if c != v {
                clipped = true;
            }
            a[i] = c;
        }

        // arm: one Euler step of kinematic velocity control
        let w1 = a[0] * self.cfg.max_joint_speed;
        let w2 = a[1] * self.cfg.max_joint_speed;
        self.state.joint_angles.0 = wrap_angle(self.state.joint_angles.0 + w1);
        self.state.joint_angles.1 = wrap_angle(self.state.joint_angles.1 + w2);
        self.state.joint_velocities = (w1, w2);
        self.state.gripper_closed = a[2] > 0.0;

        // distractors follow their script regardless of the action
        for d in &mut self.state.distractors {
            let mut p = (d.pos.0 + d.vel.0, d.pos.1 + d.vel.1);
            let lo = d.radius;
            let hi = 1.0 - d.radius;
            if p.0 < lo {
                p.0 = 2.0 * lo - p.0;
                d.vel.0 = -d.vel.0;
            } else if p.0 > hi {
                p.0 = 2.0 * hi - p.0;
                d.vel.0 = -d.vel.0;
            }
            if p.1 < lo {
                p.1 = 2.0 * lo - p.1;
                d.vel.1 = -d.vel.1;
            } else if p.1 > hi {
                p.1 = 2.0 * hi - p.1;
                d.vel.1 = -d.vel.1;
            }
            d.pos = p;
        }

        // grasping
        let (_, tip) = self.fk();
        if let Some(tool) = &mut self.state.tool {
            if !tool.attached && self.state.gripper_closed {
                if dist(tip, tool.pos) < self.cfg.grasp_radius {
                    tool.attached = true;
                }
            }
        }

        self.state.step_count += 1;

        // reward: shaped negative distance, replaced by the bonus inside the
        // success radius so reward at the goal is the bonus exactly
        let task_point = match self.cfg.task {
            Task::Reach => tip,
            Task::ToolReach => self.tool_pose().map(|(_, t)| t).unwrap_or(tip),
        };
        let d_goal = dist(task_point, self.state.goal);
        let success = d_goal < self.cfg.success_radius;
        let reward = if success { self.cfg.success_bonus } else { -d_goal };

        let terminated = success && self.cfg.terminate_on_success;
        let done = terminated || self.state.step_count >= self.cfg.episode_len;
        let info = StepInfo {
            success,
            action_clipped: clipped,
            goal_distance: d_goal,
            tool_attached: self.state.tool.as_ref().is_some_and(|t| t.attached),
        };
        Ok(self.observe(reward, done, terminated, info))
    }

    fn observe(
        &mut self,
        reward: f64,
        done: bool,
        terminated: bool,
        info: StepInfo,
    ) -> EnvObservation {
        let tool_pose = self.tool_pose();
        let anchor = self.cfg.anchor();
        let (elbow, tip) = self.fk();
        let c = &mut self.canvas;
        c.clear();
        c.ring(self.state.goal.0, self.state.goal.1, 0.035, 0.012, render::GOAL, 0);
        for d in &self.state.distractors {
            c.disc(d.pos.0, d.pos.1, d.radius, d.color, MASK_DISTRACTOR);
        }
        if let Some((grip, tool_tip)) = tool_pose {
            c.capsule(grip, tool_tip, 0.018, render::TOOL, MASK_TOOL);
        }
        c.capsule(anchor, elbow, self.cfg.arm_half_width, render::ARM, MASK_AGENT);
        c.capsule(elbow, tip, self.cfg.arm_half_width * 0.85, render::ARM, MASK_AGENT);
        let grip_color = if self.state.gripper_closed {
            render::GRIPPER_CLOSED
        } else {
            render::GRIPPER_OPEN
        };
        c.disc(tip.0, tip.1, 0.042, grip_color, MASK_AGENT);

        EnvObservation {
            frame: c.frame(),
            reward,
            done,
            terminated,
            masks: c.mask(),
            info,
        }
    }

    /// Test and oracle hook: place the arm analytically.
    pub fn set_joint_angles(&mut self, t1: f64, t2: f64) {
        self.state.joint_angles = (wrap_angle(t1), wrap_angle(t2));
    }

    /// Oracle hook for property tests that need to perturb the world.
    pub fn state_mut(&mut self) -> &mut ArmWorldState {
        &mut self.state
    }

    pub fn goal(&self) -> (f64, f64) {
        self.state.goal
    }

    pub fn effector(&self) -> (f64, f64) {
        self.fk().1
    }
}

fn segment_dist(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let ab = (b.0 - a.0, b.1 - a.1);
    let len2 = ab.0 * ab.0 + ab.1 * ab.1;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * ab.0 + (p.1 - a.1) * ab.1) / len2).clamp(0.0, 1.0)
    };
    dist(p, (a.0 + t * ab.0, a.1 + t * ab.1))
}
