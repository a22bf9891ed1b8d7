//! Finite-difference validation of every layer's backward pass.
//!
//! Each case builds a tiny network ending in a scalar loss, computes analytic
//! parameter and input gradients, and compares against central differences.

use ef_nn::gradcheck::{finite_diff, max_rel_err};
use ef_nn::{AvgPool2d, Conv2d, ConvTranspose2d, Grads, LayerNorm, Linear, ParamStore};
use ndarray::{Array2, Array4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

const TOL: f64 = 1e-7;
const EPS: f64 = 1e-5;

fn rand2(rng: &mut impl Rng, r: usize, c: usize) -> Array2<f64> {
    Array2::from_shape_fn((r, c), |_| rng.random_range(-1.0..1.0))
}

fn rand4(rng: &mut impl Rng, d: (usize, usize, usize, usize)) -> Array4<f64> {
    Array4::from_shape_fn(d, |_| rng.random_range(-1.0..1.0))
}

/// Loss used throughout: 0.5 * sum(y^2), so dL/dy = y.
fn sq_loss_2(y: &Array2<f64>) -> (f64, Array2<f64>) {
    (0.5 * y.iter().map(|v| v * v).sum::<f64>(), y.clone())
}

fn sq_loss_4(y: &Array4<f64>) -> (f64, Array4<f64>) {
    (0.5 * y.iter().map(|v| v * v).sum::<f64>(), y.clone())
}

#[test]
fn linear_gradients() {
    let mut rng = ChaCha12Rng::seed_from_u64(1);
    let mut ps = ParamStore::new();
    let lin = Linear::new(&mut ps, &mut rng, "l", 4, 3);
    let x = rand2(&mut rng, 5, 4);

    let y = lin.forward(&ps, x.view());
    let (_, gy) = sq_loss_2(&y);
    let mut gr = Grads::new(&ps);
    lin.backward(&ps, x.view(), gy.view(), &mut gr);

    let ids: Vec<_> = ps.ids().collect();
    let num = finite_diff(&mut ps, &ids, EPS, |ps| sq_loss_2(&lin.forward(ps, x.view())).0);
    assert!(max_rel_err(&gr, &num, &ids) < TOL);
}

#[test]
fn conv_gradients_including_input() {
    let mut rng = ChaCha12Rng::seed_from_u64(2);
    for &(s, p) in &[(1usize, 0usize), (2, 1)] {
        let mut ps = ParamStore::new();
        let conv = Conv2d::new(&mut ps, &mut rng, "c", 2, 3, 3, s, p);
        let x = rand4(&mut rng, (2, 2, 6, 6));

        let y = conv.forward(&ps, x.view());
        let (_, gy) = sq_loss_4(&y);
        let mut gr = Grads::new(&ps);
        let gx = conv.backward(&ps, x.view(), gy.view(), &mut gr);

        let ids: Vec<_> = ps.ids().collect();
        let num = finite_diff(&mut ps, &ids, EPS, |ps| sq_loss_4(&conv.forward(ps, x.view())).0);
        assert!(max_rel_err(&gr, &num, &ids) < TOL, "params stride {s} pad {p}");

        // input gradient, probed directly
        let mut x_pert = x.clone();
        let mut worst = 0.0f64;
        for idx in [(0, 0, 0, 0), (1, 1, 3, 2), (0, 1, 5, 5)] {
            let orig = x_pert[idx];
            x_pert[idx] = orig + EPS;
            let up = sq_loss_4(&conv.forward(&ps, x_pert.view())).0;
            x_pert[idx] = orig - EPS;
            let down = sq_loss_4(&conv.forward(&ps, x_pert.view())).0;
            x_pert[idx] = orig;
            let n = (up - down) / (2.0 * EPS);
            worst = worst.max((gx[idx] - n).abs() / 1.0f64.max(n.abs()));
        }
        assert!(worst < TOL, "input stride {s} pad {p}: {worst}");
    }
}

#[test]
fn conv_transpose_gradients() {
    let mut rng = ChaCha12Rng::seed_from_u64(3);
    let mut ps = ParamStore::new();
    let ct = ConvTranspose2d::new(&mut ps, &mut rng, "t", 3, 2, 4, 2, 1);
    let x = rand4(&mut rng, (2, 3, 4, 4));

    let y = ct.forward(&ps, x.view());
    assert_eq!(y.dim(), (2, 2, 8, 8));
    let (_, gy) = sq_loss_4(&y);
    let mut gr = Grads::new(&ps);
    let gx = ct.backward(&ps, x.view(), gy.view(), &mut gr);

    let ids: Vec<_> = ps.ids().collect();
    let num = finite_diff(&mut ps, &ids, EPS, |ps| sq_loss_4(&ct.forward(ps, x.view())).0);
    assert!(max_rel_err(&gr, &num, &ids) < TOL);

    let mut x_pert = x.clone();
    for idx in [(0, 0, 0, 0), (1, 2, 3, 1)] {
        let orig = x_pert[idx];
        x_pert[idx] = orig + EPS;
        let up = sq_loss_4(&ct.forward(&ps, x_pert.view())).0;
        x_pert[idx] = orig - EPS;
        let down = sq_loss_4(&ct.forward(&ps, x_pert.view())).0;
        x_pert[idx] = orig;
        let n = (up - down) / (2.0 * EPS);
        assert!((gx[idx] - n).abs() / 1.0f64.max(n.abs()) < TOL);
    }
}

#[test]
fn layernorm_gradients() {
    let mut rng = ChaCha12Rng::seed_from_u64(4);
    let mut ps = ParamStore::new();
    let ln = LayerNorm::new(&mut ps, "ln", 6);
    // non-unit gain so the gain path is exercised
    for (i, v) in ps.get_mut(ln.gain).iter_mut().enumerate() {
        *v = 0.5 + 0.2 * i as f64;
    }
    let x = rand2(&mut rng, 4, 6);

    let y = ln.forward(&ps, x.view());
    let (_, gy) = sq_loss_2(&y);
    let mut gr = Grads::new(&ps);
    let gx = ln.backward(&ps, x.view(), gy.view(), &mut gr);

    let ids: Vec<_> = ps.ids().collect();
    let num = finite_diff(&mut ps, &ids, EPS, |ps| sq_loss_2(&ln.forward(ps, x.view())).0);
    assert!(max_rel_err(&gr, &num, &ids) < TOL);

    let mut x_pert = x.clone();
    for idx in [(0, 0), (2, 5), (3, 3)] {
        let orig = x_pert[idx];
        x_pert[idx] = orig + EPS;
        let up = sq_loss_2(&ln.forward(&ps, x_pert.view())).0;
        x_pert[idx] = orig - EPS;
        let down = sq_loss_2(&ln.forward(&ps, x_pert.view())).0;
        x_pert[idx] = orig;
        let n = (up - down) / (2.0 * EPS);
        assert!((gx[idx] - n).abs() / 1.0f64.max(n.abs()) < TOL);
    }
}

#[test]
fn avgpool_backward_matches_finite_difference() {
    let mut rng = ChaCha12Rng::seed_from_u64(5);
    let pool = AvgPool2d::new(2);
    let x = rand4(&mut rng, (1, 2, 5, 6)); // odd height exercises truncation

    let y = pool.forward(x.view());
    assert_eq!(y.dim(), (1, 2, 2, 3));
    let (_, gy) = sq_loss_4(&y);
    let gx = pool.backward((5, 6), gy.view());

    let mut x_pert = x.clone();
    for idx in [(0, 0, 0, 0), (0, 1, 3, 5), (0, 0, 4, 0)] {
        let orig = x_pert[idx];
        x_pert[idx] = orig + EPS;
        let up = sq_loss_4(&pool.forward(x_pert.view())).0;
        x_pert[idx] = orig - EPS;
        let down = sq_loss_4(&pool.forward(x_pert.view())).0;
        x_pert[idx] = orig;
        let n = (up - down) / (2.0 * EPS);
        assert!((gx[idx] - n).abs() < 1e-9);
    }
}
