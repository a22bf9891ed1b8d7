//! Non-overlapping average pooling.

use ndarray::{Array4, ArrayView4};

/// k x k average pooling with stride k; trailing rows/cols that do not fill a
/// window are dropped.
#[derive(Debug, Clone, Copy)]
pub struct AvgPool2d {
    pub k: usize,
}

impl AvgPool2d {
    pub fn new(k: usize) -> Self {
        Self { k }
    }

    pub fn out_hw(&self, h: usize, w: usize) -> (usize, usize) {
        (h / self.k, w / self.k)
    }

    pub fn forward(&self, x: ArrayView4<f64>) -> Array4<f64> {
        let (b, c, h, w) = x.dim();
        let (oh, ow) = self.out_hw(h, w);
        let norm = 1.0 / (self.k * self.k) as f64;
        let mut y = Array4::zeros((b, c, oh, ow));
        for bi in 0..b {
            for ci in 0..c {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut acc = 0.0;
                        for i in 0..self.k {
                            for j in 0..self.k {
                                acc += x[[bi, ci, oy * self.k + i, ox * self.k + j]];
                            }
                        }
                        y[[bi, ci, oy, ox]] = acc * norm;
                    }
                }
            }
        }
        y
    }

    pub fn backward(&self, in_hw: (usize, usize), gy: ArrayView4<f64>) -> Array4<f64> {
        let (b, c, oh, ow) = gy.dim();
        let norm = 1.0 / (self.k * self.k) as f64;
        let mut gx = Array4::zeros((b, c, in_hw.0, in_hw.1));
        for bi in 0..b {
            for ci in 0..c {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let g = gy[[bi, ci, oy, ox]] * norm;
                        for i in 0..self.k {
                            for j in 0..self.k {
                                gx[[bi, ci, oy * self.k + i, ox * self.k + j]] = g;
                            }
                        }
                    }
                }
            }
        }
        gx
    }
}
