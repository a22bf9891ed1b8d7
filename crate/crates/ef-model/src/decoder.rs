//! Transposed-convolution decoder from (h_s, h_a) back to an RGB frame.

use ef_nn::{relu, relu_grad, sigmoid, sigmoid_grad_from_out, ConvTranspose2d, Grads, Linear, ParamStore};
use ndarray::{s, Array2, Array4, ArrayView2, Axis};
use rand::Rng;

use crate::config::ModelConfig;
use crate::ModelError;

#[derive(Debug)]
pub struct DecoderTrace {
    pub h: Array2<f64>,
    proj_pre: Array2<f64>,
    /// Input to each deconv level, after optional tap concatenation.
    lvl_in: Vec<Array4<f64>>,
    /// Deconv outputs before their nonlinearity.
    pre: Vec<Array4<f64>>,
    pub out: Array4<f64>,
}

#[derive(Debug, Clone)]
pub struct Decoder {
    proj: Linear,
    deconvs: Vec<ConvTranspose2d>,
    head_ch: usize,
    skip: bool,
    feat_dim: usize,
    frame_size: usize,
}

impl Decoder {
    pub fn new(cfg: &ModelConfig, ps: &mut ParamStore, rng: &mut impl Rng) -> Self {
        let levels = cfg.pyramid_levels();
        let head_ch = cfg.channels << (levels - 1);
        let proj = Linear::new(ps, rng, "dec.proj", cfg.feat_dim, head_ch * 4 * 4);
        let mut deconvs = Vec::with_capacity(levels);
        for j in 0..levels {
            // channel count halves per level; taps double the input width
            let base_in = cfg.channels << (levels - 1 - j);
            let in_ch = if cfg.skip_connections { base_in * 2 } else { base_in };
            let out_ch = if j + 1 == levels { 3 } else { cfg.channels << (levels - 2 - j) };
            deconvs.push(ConvTranspose2d::new(
                ps,
                rng,
                &format!("dec.deconv{j}"),
                in_ch,
                out_ch,
                4,
                2,
                1,
            ));
        }
        Self {
            proj,
            deconvs,
            head_ch,
            skip: cfg.skip_connections,
            feat_dim: cfg.feat_dim,
            frame_size: cfg.frame_size,
        }
    }

    pub fn uses_skips(&self) -> bool {
        self.skip
    }

    /// Decode features to frames in [0, 1]. With skip connections enabled,
    /// `taps` must hold the context encoder activations (shallow-to-deep).
    pub fn forward(
        &self,
        ps: &ParamStore,
        h: ArrayView2<f64>,
        taps: Option<&[Array4<f64>]>,
    ) -> Result<DecoderTrace, ModelError> {
        if h.ncols() != self.feat_dim {
            return Err(ModelError::Input(format!(
                "decoder expects feature dim {}, got {}",
                self.feat_dim,
                h.ncols()
            )));
        }
        if self.skip && taps.is_none() {
            return Err(ModelError::Input("decoder configured with skip connections needs taps".into()));
        }
        let b = h.nrows();
        let levels = self.deconvs.len();
        let proj_pre = self.proj.forward(ps, h);
        let mut cur = relu(&proj_pre)
            .into_shape_with_order((b, self.head_ch, 4, 4))
            .expect("projection reshape");

        let mut lvl_in = Vec::with_capacity(levels);
        let mut pre = Vec::with_capacity(levels);
        for (j, deconv) in self.deconvs.iter().enumerate() {
            if self.skip {
                // tap with matching spatial size: deepest first
                let tap = &taps.unwrap()[levels - 1 - j];
                cur = concat_channels(&cur, tap);
            }
            lvl_in.push(cur.clone());
            let z = deconv.forward(ps, cur.view());
            pre.push(z.clone());
            cur = if j + 1 == levels { sigmoid(&z) } else { relu(&z) };
        }
        debug_assert_eq!(cur.dim().2, self.frame_size);
        Ok(DecoderTrace { h: h.to_owned(), proj_pre, lvl_in, pre, out: cur })
    }

    /// Backward from the frame gradient. Returns the feature gradient and,
    /// when skips are active, the gradient flowing into each tap
    /// (shallow-to-deep, aligned with the encoder's tap order).
    pub fn backward(
        &self,
        ps: &ParamStore,
        trace: &DecoderTrace,
        g_out: &Array4<f64>,
        gr: &mut Grads,
    ) -> (Array2<f64>, Option<Vec<Array4<f64>>>) {
        let levels = self.deconvs.len();
        let mut tap_grads: Vec<Array4<f64>> = Vec::new();
        let mut g_cur = sigmoid_grad_from_out(&trace.out, g_out);
        for j in (0..levels).rev() {
            if j + 1 != levels {
                g_cur = relu_grad(&trace.pre[j], &g_cur);
            }
            let mut g_in = self.deconvs[j].backward(ps, trace.lvl_in[j].view(), g_cur.view(), gr);
            if self.skip {
                let tap_ch = trace.lvl_in[j].dim().1 / 2;
                let (g_main, g_tap) = split_channels(&g_in, tap_ch);
                tap_grads.push(g_tap);
                g_in = g_main;
            }
            g_cur = g_in;
        }
        let b = g_cur.dim().0;
        let flat = g_cur
            .into_shape_with_order((b, self.head_ch * 16))
            .expect("projection gradient reshape");
        let g_relu = relu_grad(&trace.proj_pre, &flat);
        let g_h = self.proj.backward(ps, trace.h.view(), g_relu.view(), gr);
        if self.skip {
            // collected deep-to-shallow during the reverse sweep; flip to
            // match encoder order
            tap_grads.reverse();
            (g_h, Some(tap_grads))
        } else {
            (g_h, None)
        }
    }
}

fn concat_channels(a: &Array4<f64>, b: &Array4<f64>) -> Array4<f64> {
    let (ba, ca, h, w) = a.dim();
    let cb = b.dim().1;
    assert_eq!(a.dim().0, b.dim().0);
    assert_eq!((a.dim().2, a.dim().3), (b.dim().2, b.dim().3), "tap spatial size");
    let mut out = Array4::zeros((ba, ca + cb, h, w));
    out.slice_mut(s![.., ..ca, .., ..]).assign(a);
    out.slice_mut(s![.., ca.., .., ..]).assign(b);
    out
}

fn split_channels(g: &Array4<f64>, tap_ch: usize) -> (Array4<f64>, Array4<f64>) {
    let c = g.dim().1;
    let main = g.slice_axis(Axis(1), ndarray::Slice::from(..c - tap_ch)).to_owned();
    let tap = g.slice_axis(Axis(1), ndarray::Slice::from(c - tap_ch..)).to_owned();
    (main, tap)
}
