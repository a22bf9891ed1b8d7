//! Frame-stack encoders producing the split feature vector.

use ef_nn::{relu, relu_grad, AvgPool2d, Conv2d, Grads, Linear, ParamStore};
use ndarray::{Array2, Array4, ArrayView4};
use rand::Rng;

use crate::config::{EncoderKind, ModelConfig};
use crate::split::FeatureSplit;
use crate::ModelError;

/// Intermediates kept for the backward pass. `post` activations of the
/// dcgan variant double as the skip-connection taps (context encoding only).
#[derive(Debug)]
pub struct EncoderTrace {
    pub x: Array4<f64>,
    pub pre: Vec<Array4<f64>>,
    pub post: Vec<Array4<f64>>,
    pub pooled_in_hw: Option<(usize, usize)>,
    pub flat: Array2<f64>,
}

impl EncoderTrace {
    /// Skip taps ordered shallow-to-deep (largest spatial size first).
    pub fn taps(&self) -> &[Array4<f64>] {
        &self.post
    }
}

#[derive(Debug, Clone)]
pub struct Encoder {
    kind: EncoderKind,
    convs: Vec<Conv2d>,
    pool: Option<AvgPool2d>,
    proj: Linear,
    in_ch: usize,
    frame_size: usize,
    feat_dim: usize,
}

impl Encoder {
    pub fn new(cfg: &ModelConfig, ps: &mut ParamStore, rng: &mut impl Rng) -> Self {
        let in_ch = cfg.in_channels();
        let s = cfg.frame_size;
        match cfg.encoder {
            EncoderKind::Conv => {
                let c = cfg.channels;
                let convs = vec![
                    Conv2d::new(ps, rng, "enc.conv0", in_ch, c, 3, 2, 0),
                    Conv2d::new(ps, rng, "enc.conv1", c, c, 3, 1, 0),
                    Conv2d::new(ps, rng, "enc.conv2", c, c, 3, 1, 0),
                    Conv2d::new(ps, rng, "enc.conv3", c, c, 3, 1, 0),
                ];
                let mut hw = s;
                for conv in &convs {
                    hw = conv.out_hw(hw, hw).0;
                }
                let pool = AvgPool2d::new(2);
                let pooled = pool.out_hw(hw, hw).0;
                let flat_dim = c * pooled * pooled;
                let proj = Linear::new(ps, rng, "enc.proj", flat_dim, cfg.feat_dim);
                Self {
                    kind: cfg.encoder,
                    convs,
                    pool: Some(pool),
                    proj,
                    in_ch,
                    frame_size: s,
                    feat_dim: cfg.feat_dim,
                }
            }
            EncoderKind::Dcgan => {
                let levels = cfg.pyramid_levels();
                let mut convs = Vec::with_capacity(levels);
                let mut ch_in = in_ch;
                for j in 0..levels {
                    let ch_out = cfg.channels << j;
                    convs.push(Conv2d::new(
                        ps,
                        rng,
                        &format!("enc.conv{j}"),
                        ch_in,
                        ch_out,
                        4,
                        2,
                        1,
                    ));
                    ch_in = ch_out;
                }
                let flat_dim = ch_in * 4 * 4;
                let proj = Linear::new(ps, rng, "enc.proj", flat_dim, cfg.feat_dim);
                Self {
                    kind: cfg.encoder,
                    convs,
                    pool: None,
                    proj,
                    in_ch,
                    frame_size: s,
                    feat_dim: cfg.feat_dim,
                }
            }
        }
    }

    pub fn check_input(&self, x: &ArrayView4<f64>) -> Result<(), ModelError> {
        let (_, c, h, w) = x.dim();
        if c != self.in_ch || h != self.frame_size || w != self.frame_size {
            return Err(ModelError::Input(format!(
                "encoder expects ({}, {}, {}) frames, got ({c}, {h}, {w})",
                self.in_ch, self.frame_size, self.frame_size
            )));
        }
        Ok(())
    }

    /// Encode a batch of channel-stacked context frames into split features.
    pub fn forward(
        &self,
        ps: &ParamStore,
        x: ArrayView4<f64>,
        scene_dim: usize,
        agent_dim: usize,
    ) -> Result<(FeatureSplit, EncoderTrace), ModelError> {
        self.check_input(&x)?;
        let batch = x.dim().0;
        let mut pre = Vec::with_capacity(self.convs.len());
        let mut post = Vec::with_capacity(self.convs.len());
        let mut cur = x.to_owned();
        for conv in &self.convs {
            let z = conv.forward(ps, cur.view());
            let a = relu(&z);
            pre.push(z);
            post.push(a.clone());
            cur = a;
        }
        let mut pooled_in_hw = None;
        if let Some(pool) = &self.pool {
            let (_, _, h, w) = cur.dim();
            pooled_in_hw = Some((h, w));
            cur = pool.forward(cur.view());
        }
        let flat_len = cur.len() / batch;
        let flat = cur
            .into_shape_with_order((batch, flat_len))
            .expect("contiguous activations");
        let h = self.proj.forward(ps, flat.view());
        let trace = EncoderTrace { x: x.to_owned(), pre, post, pooled_in_hw, flat };
        Ok((FeatureSplit::new(h, scene_dim, agent_dim), trace))
    }

    /// Backward from the feature gradient; `tap_grads` (shallow-to-deep, same
    /// order as [`EncoderTrace::taps`]) carries gradient injected into the
    /// skip taps by the decoder.
    pub fn backward(
        &self,
        ps: &ParamStore,
        trace: &EncoderTrace,
        g_h: &Array2<f64>,
        tap_grads: Option<&[Array4<f64>]>,
        gr: &mut Grads,
    ) -> Array4<f64> {
        let g_flat = self.proj.backward(ps, trace.flat.view(), g_h.view(), gr);
        let last_post = trace.post.last().unwrap();
        let mut g_cur: Array4<f64> = if let Some(pool) = &self.pool {
            let in_hw = trace.pooled_in_hw.unwrap();
            let (b, c) = (last_post.dim().0, last_post.dim().1);
            let (oh, ow) = pool.out_hw(in_hw.0, in_hw.1);
            let g_pooled = g_flat
                .into_shape_with_order((b, c, oh, ow))
                .expect("pool gradient reshape");
            pool.backward(in_hw, g_pooled.view())
        } else {
            let d = last_post.dim();
            g_flat.into_shape_with_order(d).expect("flat gradient reshape")
        };

        for (j, conv) in self.convs.iter().enumerate().rev() {
            if let Some(tg) = tap_grads {
                if self.kind == EncoderKind::Dcgan {
                    g_cur += &tg[j];
                }
            }
            let g_pre = relu_grad(&trace.pre[j], &g_cur);
            let input = if j == 0 { &trace.x } else { &trace.post[j - 1] };
            g_cur = conv.backward(ps, input.view(), g_pre.view(), gr);
        }
        g_cur
    }

    pub fn kind(&self) -> EncoderKind {
        self.kind
    }

    pub fn feat_dim(&self) -> usize {
        self.feat_dim
    }

    /// Channel count of each skip tap, shallow-to-deep.
    pub fn tap_channels(&self) -> Vec<usize> {
        self.convs.iter().map(|c| c.out_ch).collect()
    }
}
