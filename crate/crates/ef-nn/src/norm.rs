//! Layer normalization over the last axis.

use ndarray::{Array1, Array2, ArrayView2};

use crate::init;
use crate::store::{Grads, ParamId, ParamStore};

const EPS: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub gain: ParamId,
    pub bias: ParamId,
    pub dim: usize,
}

impl LayerNorm {
    pub fn new(ps: &mut ParamStore, name: &str, dim: usize) -> Self {
        let gain = ps.add(format!("{name}.g"), ndarray::ArrayD::ones(ndarray::IxDyn(&[dim])));
        let bias = ps.add(format!("{name}.b"), init::zeros(&[dim]));
        Self { gain, bias, dim }
    }

    pub fn forward(&self, ps: &ParamStore, x: ArrayView2<f64>) -> Array2<f64> {
        let g = ps.get(self.gain).as_slice().unwrap();
        let b = ps.get(self.bias).as_slice().unwrap();
        let mut y = x.to_owned();
        for mut row in y.rows_mut() {
            let d = row.len() as f64;
            let mean = row.sum() / d;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d;
            let inv = 1.0 / (var + EPS).sqrt();
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - mean) * inv * g[j] + b[j];
            }
        }
        y
    }

    pub fn backward(
        &self,
        ps: &ParamStore,
        x: ArrayView2<f64>,
        gy: ArrayView2<f64>,
        gr: &mut Grads,
    ) -> Array2<f64> {
        let g = ps.get(self.gain).as_slice().unwrap();
        let d = self.dim as f64;
        let mut gx = Array2::zeros(x.raw_dim());
        let mut g_gain = Array1::<f64>::zeros(self.dim);
        let mut g_bias = Array1::<f64>::zeros(self.dim);

        for ((xr, gyr), mut gxr) in x
            .rows()
            .into_iter()
            .zip(gy.rows())
            .zip(gx.rows_mut())
        {
            let mean = xr.sum() / d;
            let var = xr.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d;
            let inv = 1.0 / (var + EPS).sqrt();
            // xhat and the two row-reductions the gradient needs.
            let mut dot_gh = 0.0; // mean of gy*g
            let mut dot_ghx = 0.0; // mean of gy*g*xhat
            let xhat: Vec<f64> = xr.iter().map(|&v| (v - mean) * inv).collect();
            for j in 0..self.dim {
                let gh = gyr[j] * g[j];
                dot_gh += gh;
                dot_ghx += gh * xhat[j];
                g_gain[j] += gyr[j] * xhat[j];
                g_bias[j] += gyr[j];
            }
            dot_gh /= d;
            dot_ghx /= d;
            for j in 0..self.dim {
                let gh = gyr[j] * g[j];
                gxr[j] = inv * (gh - dot_gh - xhat[j] * dot_ghx);
            }
        }
        gr.accum(self.gain, g_gain.into_dyn());
        gr.accum(self.bias, g_bias.into_dyn());
        gx
    }
}
