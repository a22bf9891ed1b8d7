//! Elementwise activations with explicit derivatives.

use ndarray::{Array, Dimension};

pub fn relu<D: Dimension>(x: &Array<f64, D>) -> Array<f64, D> {
    x.mapv(|v| v.max(0.0))
}

/// Gradient of relu given the pre-activation input.
pub fn relu_grad<D: Dimension>(x: &Array<f64, D>, gy: &Array<f64, D>) -> Array<f64, D> {
    let mut g = gy.clone();
    g.zip_mut_with(x, |g, &x| {
        if x <= 0.0 {
            *g = 0.0
        }
    });
    g
}

pub fn tanh<D: Dimension>(x: &Array<f64, D>) -> Array<f64, D> {
    x.mapv(f64::tanh)
}

/// Gradient of tanh given the activation output.
pub fn tanh_grad_from_out<D: Dimension>(y: &Array<f64, D>, gy: &Array<f64, D>) -> Array<f64, D> {
    let mut g = gy.clone();
    g.zip_mut_with(y, |g, &y| *g *= 1.0 - y * y);
    g
}

pub fn sigmoid<D: Dimension>(x: &Array<f64, D>) -> Array<f64, D> {
    x.mapv(sigmoid_scalar)
}

pub fn sigmoid_scalar(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// Gradient of sigmoid given the activation output.
pub fn sigmoid_grad_from_out<D: Dimension>(y: &Array<f64, D>, gy: &Array<f64, D>) -> Array<f64, D> {
    let mut g = gy.clone();
    g.zip_mut_with(y, |g, &y| *g *= y * (1.0 - y));
    g
}

fn softplus(v: f64) -> f64 {
    v.max(0.0) + (-v.abs()).exp().ln_1p()
}

/// mish(x) = x * tanh(softplus(x)).
pub fn mish<D: Dimension>(x: &Array<f64, D>) -> Array<f64, D> {
    x.mapv(|v| v * softplus(v).tanh())
}

/// Gradient of mish given the pre-activation input.
pub fn mish_grad<D: Dimension>(x: &Array<f64, D>, gy: &Array<f64, D>) -> Array<f64, D> {
    let mut g = gy.clone();
    g.zip_mut_with(x, |g, &x| {
        let t = softplus(x).tanh();
        *g *= t + x * (1.0 - t * t) * sigmoid_scalar(x);
    });
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr1;

    #[test]
    fn mish_grad_matches_finite_difference() {
        let xs = arr1(&[-3.0, -0.5, 0.0, 0.7, 4.0]);
        let ones = arr1(&[1.0; 5]);
        let g = mish_grad(&xs, &ones);
        let eps = 1e-6;
        for (i, &x) in xs.iter().enumerate() {
            let f = |v: f64| v * softplus(v).tanh();
            let num = (f(x + eps) - f(x - eps)) / (2.0 * eps);
            assert!((g[i] - num).abs() < 1e-8, "x={x}: {} vs {num}", g[i]);
        }
    }

    #[test]
    fn sigmoid_is_stable_at_extremes() {
        assert!(sigmoid_scalar(-800.0) >= 0.0);
        assert!(sigmoid_scalar(800.0) <= 1.0);
        assert!((sigmoid_scalar(0.0) - 0.5).abs() < 1e-15);
    }
}
