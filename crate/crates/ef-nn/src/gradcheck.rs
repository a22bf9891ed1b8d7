//! Central finite-difference probes for validating analytic gradients.

use crate::store::{Grads, ParamId, ParamStore};

/// Numerically differentiate `loss` with respect to each listed parameter by
/// central differences. The store is restored to its original values.
pub fn finite_diff(
    ps: &mut ParamStore,
    ids: &[ParamId],
    eps: f64,
    mut loss: impl FnMut(&ParamStore) -> f64,
) -> Grads {
    let mut out = Grads::new(ps);
    for &id in ids {
        let shape = ps.get(id).raw_dim();
        let n = ps.get(id).len();
        let mut g = crate::Tensor::zeros(shape);
        for i in 0..n {
            let orig = ps.get(id).as_slice().unwrap()[i];
            ps.get_mut(id).as_slice_mut().unwrap()[i] = orig + eps;
            let up = loss(ps);
            ps.get_mut(id).as_slice_mut().unwrap()[i] = orig - eps;
            let down = loss(ps);
            ps.get_mut(id).as_slice_mut().unwrap()[i] = orig;
            g.as_slice_mut().unwrap()[i] = (up - down) / (2.0 * eps);
        }
        out.accum(id, g);
    }
    out
}

/// Largest relative error between analytic and numeric gradients over `ids`.
///
/// Relative error is |a - n| / max(1, |a|, |n|) per component, which treats
/// small absolute errors on small gradients as small.
pub fn max_rel_err(analytic: &Grads, numeric: &Grads, ids: &[ParamId]) -> f64 {
    let mut worst = 0.0f64;
    for &id in ids {
        let a = analytic.get(id);
        let n = numeric.get(id).expect("numeric gradient missing");
        match a {
            None => {
                // absent analytic gradient is an implicit zero
                for &nv in n.iter() {
                    worst = worst.max(nv.abs() / 1.0f64.max(nv.abs()));
                }
            }
            Some(a) => {
                for (&av, &nv) in a.iter().zip(n.iter()) {
                    let denom = 1.0f64.max(av.abs()).max(nv.abs());
                    worst = worst.max((av - nv).abs() / denom);
                }
            }
        }
    }
    worst
}
