//! 2-D convolution and transposed convolution (NCHW, square kernels).
//!
//! Both layers lower to GEMM through an im2col buffer with layout
//! (C*K*K, OH*OW); the transposed convolution reuses the same gather/scatter
//! pair with the roles of input and output swapped. Batch items are
//! independent and processed in parallel.

use ndarray::{Array2, Array4, ArrayView2, ArrayView3, ArrayView4, ArrayViewMut3, Axis};
use rand::Rng;
use rayon::prelude::*;

use crate::init;
use crate::store::{Grads, ParamId, ParamStore};

/// Output spatial size of a convolution.
pub fn conv_out_size(in_size: usize, k: usize, stride: usize, pad: usize) -> usize {
    (in_size + 2 * pad - k) / stride + 1
}

/// Output spatial size of a transposed convolution.
pub fn conv_transpose_out_size(in_size: usize, k: usize, stride: usize, pad: usize) -> usize {
    (in_size - 1) * stride + k - 2 * pad
}

/// Gather `x` (C, H, W) into `col` with layout (C*K*K, oh*ow):
/// col[(c*K+ki)*K+kj, oy*ow+ox] = x[c, oy*s+ki-p, ox*s+kj-p], zero outside.
fn im2col(x: ArrayView3<f64>, k: usize, s: usize, p: usize, oh: usize, ow: usize, col: &mut [f64]) {
    let (c_in, h, w) = x.dim();
    debug_assert_eq!(col.len(), c_in * k * k * oh * ow);
    let xs = x.as_slice().expect("im2col input must be contiguous");
    col.fill(0.0);
    for c in 0..c_in {
        for ki in 0..k {
            for kj in 0..k {
                let row = (c * k + ki) * k + kj;
                let dst_row = &mut col[row * oh * ow..(row + 1) * oh * ow];
                for oy in 0..oh {
                    let iy = (oy * s + ki) as isize - p as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let src_base = (c * h + iy as usize) * w;
                    let dst_base = oy * ow;
                    for ox in 0..ow {
                        let ix = (ox * s + kj) as isize - p as isize;
                        if ix >= 0 && ix < w as isize {
                            dst_row[dst_base + ox] = xs[src_base + ix as usize];
                        }
                    }
                }
            }
        }
    }
}

/// Scatter-add the adjoint of [`im2col`]: x[c, oy*s+ki-p, ox*s+kj-p] += col[...].
fn col2im(col: &[f64], k: usize, s: usize, p: usize, oh: usize, ow: usize, mut x: ArrayViewMut3<f64>) {
    let (c_in, h, w) = x.dim();
    debug_assert_eq!(col.len(), c_in * k * k * oh * ow);
    let xs = x.as_slice_mut().expect("col2im output must be contiguous");
    for c in 0..c_in {
        for ki in 0..k {
            for kj in 0..k {
                let row = (c * k + ki) * k + kj;
                let src_row = &col[row * oh * ow..(row + 1) * oh * ow];
                for oy in 0..oh {
                    let iy = (oy * s + ki) as isize - p as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let dst_base = (c * h + iy as usize) * w;
                    let src_base = oy * ow;
                    for ox in 0..ow {
                        let ix = (ox * s + kj) as isize - p as isize;
                        if ix >= 0 && ix < w as isize {
                            xs[dst_base + ix as usize] += src_row[src_base + ox];
                        }
                    }
                }
            }
        }
    }
}

fn as2(ps: &ParamStore, id: ParamId) -> ArrayView2<'_, f64> {
    ps.get(id).view().into_dimensionality::<ndarray::Ix2>().unwrap()
}

/// Standard convolution. Weight is stored flattened as (Cout, Cin*K*K).
#[derive(Debug, Clone)]
pub struct Conv2d {
    pub w: ParamId,
    pub b: ParamId,
    pub in_ch: usize,
    pub out_ch: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
}

impl Conv2d {
    pub fn new(
        ps: &mut ParamStore,
        rng: &mut impl Rng,
        name: &str,
        in_ch: usize,
        out_ch: usize,
        k: usize,
        stride: usize,
        pad: usize,
    ) -> Self {
        let fan_in = in_ch * k * k;
        let w = ps.add(
            format!("{name}.w"),
            init::kaiming_uniform(rng, fan_in, &[out_ch, fan_in]),
        );
        let b = ps.add(format!("{name}.b"), init::kaiming_uniform(rng, fan_in, &[out_ch]));
        Self { w, b, in_ch, out_ch, k, stride, pad }
    }

    pub fn out_hw(&self, h: usize, w: usize) -> (usize, usize) {
        (
            conv_out_size(h, self.k, self.stride, self.pad),
            conv_out_size(w, self.k, self.stride, self.pad),
        )
    }

    pub fn forward(&self, ps: &ParamStore, x: ArrayView4<f64>) -> Array4<f64> {
        let (batch, c_in, h, w) = x.dim();
        assert_eq!(c_in, self.in_ch, "conv input channels");
        let (oh, ow) = self.out_hw(h, w);
        let wmat = as2(ps, self.w);
        let bias = ps.get(self.b).as_slice().unwrap();
        let ckk = self.in_ch * self.k * self.k;

        let mut out = vec![0.0; batch * self.out_ch * oh * ow];
        out.par_chunks_mut(self.out_ch * oh * ow)
            .enumerate()
            .for_each(|(bi, chunk)| {
                let mut col = vec![0.0; ckk * oh * ow];
                im2col(x.index_axis(Axis(0), bi), self.k, self.stride, self.pad, oh, ow, &mut col);
                let col_m = ArrayView2::from_shape((ckk, oh * ow), &col).unwrap();
                let y = wmat.dot(&col_m); // (Cout, OH*OW)
                for co in 0..self.out_ch {
                    let b_v = bias[co];
                    let dst = &mut chunk[co * oh * ow..(co + 1) * oh * ow];
                    let src = y.row(co);
                    let src = src.as_slice().unwrap();
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d = s + b_v;
                    }
                }
            });
        Array4::from_shape_vec((batch, self.out_ch, oh, ow), out).unwrap()
    }

    pub fn backward(
        &self,
        ps: &ParamStore,
        x: ArrayView4<f64>,
        gy: ArrayView4<f64>,
        gr: &mut Grads,
    ) -> Array4<f64> {
        let (batch, _, h, w) = x.dim();
        let (_, _, oh, ow) = gy.dim();
        let wmat = as2(ps, self.w);
        let ckk = self.in_ch * self.k * self.k;

        let mut gx = vec![0.0; batch * self.in_ch * h * w];
        // Per-item gradients are collected in batch order and folded
        // serially so results do not depend on thread scheduling.
        let per_item: Vec<(Array2<f64>, ndarray::Array1<f64>)> = gx
            .par_chunks_mut(self.in_ch * h * w)
            .enumerate()
            .map(|(bi, gx_chunk)| {
                let mut col = vec![0.0; ckk * oh * ow];
                im2col(x.index_axis(Axis(0), bi), self.k, self.stride, self.pad, oh, ow, &mut col);
                let col_m = ArrayView2::from_shape((ckk, oh * ow), &col).unwrap();

                let gy_i = gy.index_axis(Axis(0), bi);
                let gy_m = ArrayView2::from_shape((self.out_ch, oh * ow), gy_i.as_slice().unwrap())
                    .unwrap();

                let gw_i = gy_m.dot(&col_m.t()); // (Cout, CKK)
                let gb_i = gy_m.sum_axis(Axis(1)); // (Cout,)

                let gcol = wmat.t().dot(&gy_m); // (CKK, OH*OW)
                let mut gx_v = ArrayViewMut3::from_shape((self.in_ch, h, w), gx_chunk).unwrap();
                col2im(gcol.as_slice().unwrap(), self.k, self.stride, self.pad, oh, ow, gx_v.view_mut());
                (gw_i, gb_i)
            })
            .collect();
        let mut gw = Array2::zeros((self.out_ch, ckk));
        let mut gb = ndarray::Array1::zeros(self.out_ch);
        for (gw_i, gb_i) in per_item {
            gw += &gw_i;
            gb += &gb_i;
        }
        gr.accum(self.w, gw.into_dyn());
        gr.accum(self.b, gb.into_dyn());
        Array4::from_shape_vec((batch, self.in_ch, h, w), gx).unwrap()
    }
}

/// Transposed convolution. Weight is stored flattened as (Cin, Cout*K*K).
#[derive(Debug, Clone)]
pub struct ConvTranspose2d {
    pub w: ParamId,
    pub b: ParamId,
    pub in_ch: usize,
    pub out_ch: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvTranspose2d {
    pub fn new(
        ps: &mut ParamStore,
        rng: &mut impl Rng,
        name: &str,
        in_ch: usize,
        out_ch: usize,
        k: usize,
        stride: usize,
        pad: usize,
    ) -> Self {
        let fan_in = in_ch * k * k;
        let w = ps.add(
            format!("{name}.w"),
            init::kaiming_uniform(rng, fan_in, &[in_ch, out_ch * k * k]),
        );
        let b = ps.add(format!("{name}.b"), init::kaiming_uniform(rng, fan_in, &[out_ch]));
        Self { w, b, in_ch, out_ch, k, stride, pad }
    }

    pub fn out_hw(&self, h: usize, w: usize) -> (usize, usize) {
        (
            conv_transpose_out_size(h, self.k, self.stride, self.pad),
            conv_transpose_out_size(w, self.k, self.stride, self.pad),
        )
    }

    /// x: (B, Cin, IH, IW) -> (B, Cout, OH, OW).
    pub fn forward(&self, ps: &ParamStore, x: ArrayView4<f64>) -> Array4<f64> {
        let (batch, c_in, ih, iw) = x.dim();
        assert_eq!(c_in, self.in_ch, "conv-transpose input channels");
        let (oh, ow) = self.out_hw(ih, iw);
        let wmat = as2(ps, self.w); // (Cin, Cout*K*K)
        let bias = ps.get(self.b).as_slice().unwrap();

        let mut out = vec![0.0; batch * self.out_ch * oh * ow];
        out.par_chunks_mut(self.out_ch * oh * ow)
            .enumerate()
            .for_each(|(bi, chunk)| {
                let x_i = x.index_axis(Axis(0), bi);
                let x_m = ArrayView2::from_shape((self.in_ch, ih * iw), x_i.as_slice().unwrap())
                    .unwrap();
                // (Cout*K*K, IH*IW): same layout im2col would produce for the
                // adjoint convolution from (Cout, OH, OW) down to (IH, IW).
                let col = wmat.t().dot(&x_m);
                let mut o_v = ArrayViewMut3::from_shape((self.out_ch, oh, ow), chunk).unwrap();
                col2im(col.as_slice().unwrap(), self.k, self.stride, self.pad, ih, iw, o_v.view_mut());
                for co in 0..self.out_ch {
                    let b_v = bias[co];
                    for v in &mut chunk[co * oh * ow..(co + 1) * oh * ow] {
                        *v += b_v;
                    }
                }
            });
        Array4::from_shape_vec((batch, self.out_ch, oh, ow), out).unwrap()
    }

    pub fn backward(
        &self,
        ps: &ParamStore,
        x: ArrayView4<f64>,
        gy: ArrayView4<f64>,
        gr: &mut Grads,
    ) -> Array4<f64> {
        let (batch, _, ih, iw) = x.dim();
        let wmat = as2(ps, self.w);
        let cokk = self.out_ch * self.k * self.k;

        let mut gx = vec![0.0; batch * self.in_ch * ih * iw];
        let per_item: Vec<(Array2<f64>, ndarray::Array1<f64>)> = gx
            .par_chunks_mut(self.in_ch * ih * iw)
            .enumerate()
            .map(|(bi, gx_chunk)| {
                let mut gcol = vec![0.0; cokk * ih * iw];
                im2col(gy.index_axis(Axis(0), bi), self.k, self.stride, self.pad, ih, iw, &mut gcol);
                let gcol_m = ArrayView2::from_shape((cokk, ih * iw), &gcol).unwrap();

                let x_i = x.index_axis(Axis(0), bi);
                let x_m = ArrayView2::from_shape((self.in_ch, ih * iw), x_i.as_slice().unwrap())
                    .unwrap();

                let gw_i = x_m.dot(&gcol_m.t()); // (Cin, Cout*K*K)
                let gy_i = gy.index_axis(Axis(0), bi);
                let gb_i = gy_i.sum_axis(Axis(2)).sum_axis(Axis(1));

                let gx_m = wmat.dot(&gcol_m); // (Cin, IH*IW)
                gx_chunk.copy_from_slice(gx_m.as_slice().unwrap());
                (gw_i, gb_i)
            })
            .collect();
        let mut gw = Array2::zeros((self.in_ch, cokk));
        let mut gb = ndarray::Array1::zeros(self.out_ch);
        for (gw_i, gb_i) in per_item {
            gw += &gw_i;
            gb += &gb_i;
        }
        gr.accum(self.w, gw.into_dyn());
        gr.accum(self.b, gb.into_dyn());
        Array4::from_shape_vec((batch, self.in_ch, ih, iw), gx).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array4;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    /// Naive direct convolution used as an independent reference.
    fn conv_ref(
        x: &Array4<f64>,
        w: &Array2<f64>, // (Cout, Cin*K*K)
        b: &[f64],
        cin: usize,
        k: usize,
        s: usize,
        p: usize,
    ) -> Array4<f64> {
        let (batch, _, h, wd) = x.dim();
        let cout = w.nrows();
        let oh = conv_out_size(h, k, s, p);
        let ow = conv_out_size(wd, k, s, p);
        let mut y = Array4::zeros((batch, cout, oh, ow));
        for bi in 0..batch {
            for co in 0..cout {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut acc = b[co];
                        for c in 0..cin {
                            for ki in 0..k {
                                for kj in 0..k {
                                    let iy = (oy * s + ki) as isize - p as isize;
                                    let ix = (ox * s + kj) as isize - p as isize;
                                    if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < wd
                                    {
                                        acc += x[[bi, c, iy as usize, ix as usize]]
                                            * w[[co, (c * k + ki) * k + kj]];
                                    }
                                }
                            }
                        }
                        y[[bi, co, oy, ox]] = acc;
                    }
                }
            }
        }
        y
    }

    fn rand4(rng: &mut impl Rng, d: (usize, usize, usize, usize)) -> Array4<f64> {
        let n = d.0 * d.1 * d.2 * d.3;
        Array4::from_shape_vec(d, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn conv_forward_matches_naive_reference() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for &(s, p) in &[(1usize, 0usize), (2, 1), (2, 0)] {
            let mut ps = ParamStore::new();
            let conv = Conv2d::new(&mut ps, &mut rng, "c", 3, 4, 3, s, p);
            let x = rand4(&mut rng, (2, 3, 7, 7));
            let y = conv.forward(&ps, x.view());
            let w = as2(&ps, conv.w).to_owned();
            let b: Vec<f64> = ps.get(conv.b).iter().copied().collect();
            let y_ref = conv_ref(&x, &w, &b, 3, 3, s, p);
            let err = (&y - &y_ref).iter().fold(0.0f64, |a, v| a.max(v.abs()));
            assert!(err < 1e-12, "stride {s} pad {p}: max err {err}");
        }
    }

    #[test]
    fn conv_transpose_is_adjoint_of_conv() {
        // <conv(x), y> == <x, convT(y)> when both share the same kernel map.
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let (cin, cout, k, s, p) = (3usize, 2usize, 4usize, 2usize, 1usize);
        let mut ps = ParamStore::new();
        let conv = Conv2d::new(&mut ps, &mut rng, "c", cin, cout, k, s, p);
        *ps.get_mut(conv.b) = crate::init::zeros(&[cout]);

        // Mirror the flat conv weight (Cout, Cin*K*K) into convT layout (Cin, Cout*K*K).
        let w = as2(&ps, conv.w).to_owned();
        let mut ps_t = ParamStore::new();
        let convt = ConvTranspose2d::new(&mut ps_t, &mut rng, "t", cout, cin, k, s, p);
        *ps_t.get_mut(convt.b) = crate::init::zeros(&[cin]);
        {
            let wt = ps_t.get_mut(convt.w);
            for co in 0..cout {
                for c in 0..cin {
                    for kk in 0..k * k {
                        wt[[co, c * k * k + kk]] = w[[co, c * k * k + kk]];
                    }
                }
            }
        }

        let x = rand4(&mut rng, (1, cin, 8, 8));
        let hw = conv.out_hw(8, 8);
        let y = rand4(&mut rng, (1, cout, hw.0, hw.1));
        let cx = conv.forward(&ps, x.view());
        let ty = convt.forward(&ps_t, y.view());
        assert_eq!(ty.dim(), x.dim());

        let lhs: f64 = (&cx * &y).sum();
        let rhs: f64 = (&x * &ty).sum();
        assert!((lhs - rhs).abs() < 1e-9, "adjoint identity violated: {lhs} vs {rhs}");
    }
}
