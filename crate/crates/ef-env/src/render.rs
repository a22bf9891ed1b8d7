//! Flat-shaded rasterizer with exact per-pixel ownership.

use ef_data::{Frame, MaskFrame};

pub type Color = [u8; 3];

pub const BACKGROUND: Color = [26, 26, 30];
pub const ARM: Color = [60, 200, 60];
pub const GRIPPER_OPEN: Color = [120, 230, 120];
pub const GRIPPER_CLOSED: Color = [30, 150, 30];
pub const GOAL: Color = [235, 210, 50];
pub const TOOL: Color = [230, 130, 40];
pub const DISTRACTOR_COLORS: [Color; 4] =
    [[70, 110, 235], [200, 70, 200], [60, 190, 200], [180, 180, 90]];

/// Paint target tracking which object owns each pixel. Later draws
/// overwrite earlier ones, so ownership reflects the topmost shape and the
/// resulting masks are exact and disjoint.
#[derive(Clone)]
pub struct Canvas {
    pub size: usize,
    px: Vec<u8>,
    owner: Vec<u8>,
}

impl Canvas {
    pub fn new(size: usize) -> Self {
        let mut c = Self { size, px: vec![0; size * size * 3], owner: vec![0; size * size] };
        c.clear();
        c
    }

    pub fn clear(&mut self) {
        for i in 0..self.size * self.size {
            self.px[i * 3..i * 3 + 3].copy_from_slice(&BACKGROUND);
            self.owner[i] = 0;
        }
    }

    fn paint(&mut self, x: usize, y: usize, color: Color, owner: u8) {
        let i = y * self.size + x;
        self.px[i * 3..i * 3 + 3].copy_from_slice(&color);
        self.owner[i] = owner;
    }

    /// World coordinate of a pixel center ([0,1] square).
    fn center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) / self.size as f64
    }

    pub fn disc(&mut self, cx: f64, cy: f64, r: f64, color: Color, owner: u8) {
        let s = self.size as f64;
        let x0 = (((cx - r) * s).floor().max(0.0)) as usize;
        let x1 = (((cx + r) * s).ceil().min(s - 1.0)) as usize;
        let y0 = (((cy - r) * s).floor().max(0.0)) as usize;
        let y1 = (((cy + r) * s).ceil().min(s - 1.0)) as usize;
        for y in y0..=y1 {
            for x in x0..=x1 {
                let (px, py) = (self.center(x), self.center(y));
                if (px - cx).powi(2) + (py - cy).powi(2) <= r * r {
                    self.paint(x, y, color, owner);
                }
            }
        }
    }

    /// Thick segment (capsule) from a to b.
    pub fn capsule(&mut self, a: (f64, f64), b: (f64, f64), half_w: f64, color: Color, owner: u8) {
        let s = self.size as f64;
        let min_x = a.0.min(b.0) - half_w;
        let max_x = a.0.max(b.0) + half_w;
        let min_y = a.1.min(b.1) - half_w;
        let max_y = a.1.max(b.1) + half_w;
        let x0 = ((min_x * s).floor().max(0.0)) as usize;
        let x1 = ((max_x * s).ceil().min(s - 1.0)) as usize;
        let y0 = ((min_y * s).floor().max(0.0)) as usize;
        let y1 = ((max_y * s).ceil().min(s - 1.0)) as usize;
        let ab = (b.0 - a.0, b.1 - a.1);
        let len2 = ab.0 * ab.0 + ab.1 * ab.1;
        for y in y0..=y1 {
            for x in x0..=x1 {
                let p = (self.center(x), self.center(y));
                let t = if len2 == 0.0 {
                    0.0
                } else {
                    (((p.0 - a.0) * ab.0 + (p.1 - a.1) * ab.1) / len2).clamp(0.0, 1.0)
                };
                let q = (a.0 + t * ab.0, a.1 + t * ab.1);
                if (p.0 - q.0).powi(2) + (p.1 - q.1).powi(2) <= half_w * half_w {
                    self.paint(x, y, color, owner);
                }
            }
        }
    }

    /// Ring outline of a disc (goal marker).
    pub fn ring(&mut self, cx: f64, cy: f64, r: f64, thickness: f64, color: Color, owner: u8) {
        let s = self.size as f64;
        let rr = r + thickness;
        let x0 = (((cx - rr) * s).floor().max(0.0)) as usize;
        let x1 = (((cx + rr) * s).ceil().min(s - 1.0)) as usize;
        let y0 = (((cy - rr) * s).floor().max(0.0)) as usize;
        let y1 = (((cy + rr) * s).ceil().min(s - 1.0)) as usize;
        for y in y0..=y1 {
            for x in x0..=x1 {
                let (px, py) = (self.center(x), self.center(y));
                let d2 = (px - cx).powi(2) + (py - cy).powi(2);
                if d2 <= rr * rr && d2 >= (r - thickness).max(0.0).powi(2) {
                    self.paint(x, y, color, owner);
                }
            }
        }
    }

    pub fn frame(&self) -> Frame {
        Frame { h: self.size, w: self.size, data: self.px.clone() }
    }

    pub fn mask(&self) -> MaskFrame {
        MaskFrame { h: self.size, w: self.size, bits: self.owner.clone() }
    }

    pub fn owner_at(&self, y: usize, x: usize) -> u8 {
        self.owner[y * self.size + x]
    }
}
