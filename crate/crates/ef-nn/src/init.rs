//! Weight initializers.

use ndarray::{ArrayD, IxDyn};
use rand::Rng;

/// Uniform(-b, b) with b = sqrt(1 / fan_in), the PyTorch default for
/// linear and convolution layers.
pub fn kaiming_uniform(rng: &mut impl Rng, fan_in: usize, shape: &[usize]) -> ArrayD<f64> {
    let bound = (1.0 / fan_in.max(1) as f64).sqrt();
    let n: usize = shape.iter().product();
    let data: Vec<f64> = (0..n).map(|_| rng.random_range(-bound..bound)).collect();
    ArrayD::from_shape_vec(IxDyn(shape), data).expect("shape/product mismatch")
}

pub fn zeros(shape: &[usize]) -> ArrayD<f64> {
    ArrayD::zeros(IxDyn(shape))
}
