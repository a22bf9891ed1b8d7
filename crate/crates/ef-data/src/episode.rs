//! Sealed episodes and their frame/mask representations.

use ndarray::Array3;

use crate::DataError;

pub const MASK_AGENT: u8 = 1;
pub const MASK_TOOL: u8 = 2;
pub const MASK_DISTRACTOR: u8 = 4;

/// RGB frame stored as 8-bit channels, row-major HWC.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub h: usize,
    pub w: usize,
    pub data: Vec<u8>,
}

impl Frame {
    pub fn new(h: usize, w: usize, data: Vec<u8>) -> Result<Self, DataError> {
        if data.len() != h * w * 3 {
            return Err(DataError::DimensionMismatch(format!(
                "frame data length {} for {h}x{w}x3",
                data.len()
            )));
        }
        Ok(Self { h, w, data })
    }

    pub fn zeros(h: usize, w: usize) -> Self {
        Self { h, w, data: vec![0; h * w * 3] }
    }

    /// Convert to a (3, h, w) float array with values in [0, 1].
    pub fn to_chw(&self) -> Array3<f64> {
        let mut out = Array3::zeros((3, self.h, self.w));
        for y in 0..self.h {
            for x in 0..self.w {
                let base = (y * self.w + x) * 3;
                for c in 0..3 {
                    out[[c, y, x]] = self.data[base + c] as f64 / 255.0;
                }
            }
        }
        out
    }

    /// Quantize a (3, h, w) float array in [0, 1] back to 8-bit.
    pub fn from_chw(a: &Array3<f64>) -> Self {
        let (_, h, w) = a.dim();
        let mut data = vec![0u8; h * w * 3];
        for y in 0..h {
            for x in 0..w {
                for c in 0..3 {
                    data[(y * w + x) * 3 + c] = (a[[c, y, x]].clamp(0.0, 1.0) * 255.0).round() as u8;
                }
            }
        }
        Self { h, w, data }
    }
}

/// Per-pixel ground-truth labels, one bitfield byte per pixel.
///
/// Evaluation-only channel: training code never reads masks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskFrame {
    pub h: usize,
    pub w: usize,
    pub bits: Vec<u8>,
}

impl MaskFrame {
    pub fn empty(h: usize, w: usize) -> Self {
        Self { h, w, bits: vec![0; h * w] }
    }

    pub fn count(&self, which: u8) -> usize {
        self.bits.iter().filter(|&&b| b & which != 0).count()
    }

    pub fn is(&self, y: usize, x: usize, which: u8) -> bool {
        self.bits[y * self.w + x] & which != 0
    }

    /// Masks are mutually exclusive by construction; true if any pixel
    /// carries more than one label.
    pub fn has_overlap(&self) -> bool {
        self.bits.iter().any(|&b| b.count_ones() > 1)
    }
}

/// A sealed trajectory: equal-length frame and action tracks plus the reward
/// for each executed action.
#[derive(Debug, Clone)]
pub struct Episode {
    pub id: u64,
    pub frames: Vec<Frame>,
    pub actions: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    /// True if the environment signaled termination (as opposed to a time
    /// limit); controls bootstrap masking of transitions near the end.
    pub terminated: bool,
    /// Evaluation-only ground-truth masks, aligned with `frames`.
    pub masks: Option<Vec<MaskFrame>>,
}

impl Episode {
    /// Number of stored steps (frames).
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn action_dim(&self) -> usize {
        self.actions.first().map_or(0, |a| a.len())
    }

    pub fn validate(&self) -> Result<(), DataError> {
        if self.frames.len() != self.actions.len() || self.frames.len() != self.rewards.len() {
            return Err(DataError::DimensionMismatch(format!(
                "episode {}: {} frames, {} actions, {} rewards",
                self.id,
                self.frames.len(),
                self.actions.len(),
                self.rewards.len()
            )));
        }
        let dim = self.action_dim();
        for (t, a) in self.actions.iter().enumerate() {
            if a.len() != dim {
                return Err(DataError::DimensionMismatch(format!(
                    "episode {}: action {t} has dim {}, expected {dim}",
                    self.id,
                    a.len()
                )));
            }
            if a.iter().any(|v| !(-1.0..=1.0).contains(v)) {
                return Err(DataError::OutOfRange(format!(
                    "episode {}: action {t} outside [-1, 1]",
                    self.id
                )));
            }
        }
        if let Some(masks) = &self.masks {
            if masks.len() != self.frames.len() {
                return Err(DataError::DimensionMismatch(format!(
                    "episode {}: {} masks for {} frames",
                    self.id,
                    masks.len(),
                    self.frames.len()
                )));
            }
        }
        Ok(())
    }
}
