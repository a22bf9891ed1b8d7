//! Fully-connected layer.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use crate::init;
use crate::store::{Grads, ParamId, ParamStore};

/// y = x Wᵀ + b with W of shape (out, in).
#[derive(Debug, Clone)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new(
        ps: &mut ParamStore,
        rng: &mut impl Rng,
        name: &str,
        in_dim: usize,
        out_dim: usize,
    ) -> Self {
        let w = ps.add(
            format!("{name}.w"),
            init::kaiming_uniform(rng, in_dim, &[out_dim, in_dim]),
        );
        let b = ps.add(
            format!("{name}.b"),
            init::kaiming_uniform(rng, in_dim, &[out_dim]),
        );
        Self { w, b, in_dim, out_dim }
    }

    pub fn forward(&self, ps: &ParamStore, x: ArrayView2<f64>) -> Array2<f64> {
        debug_assert_eq!(x.ncols(), self.in_dim);
        let w = ps.get(self.w).view().into_dimensionality::<ndarray::Ix2>().unwrap();
        let b = ps.get(self.b).view().into_dimensionality::<ndarray::Ix1>().unwrap();
        let mut y = x.dot(&w.t());
        y += &b;
        y
    }

    /// Returns the input gradient; accumulates dW and db into `gr`.
    pub fn backward(
        &self,
        ps: &ParamStore,
        x: ArrayView2<f64>,
        gy: ArrayView2<f64>,
        gr: &mut Grads,
    ) -> Array2<f64> {
        let w = ps.get(self.w).view().into_dimensionality::<ndarray::Ix2>().unwrap();
        let gw = gy.t().dot(&x);
        let gb: Array1<f64> = gy.sum_axis(Axis(0));
        gr.accum(self.w, gw.into_dyn());
        gr.accum(self.b, gb.into_dyn());
        gy.dot(&w)
    }
}
