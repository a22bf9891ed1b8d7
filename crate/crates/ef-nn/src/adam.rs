//! Adam optimizer over a [`ParamStore`].

use serde::{Deserialize, Serialize};

use crate::store::{Grads, ParamStore};
use crate::Tensor;

/// Adam with per-parameter state. Parameters whose gradient slot is empty are
/// left completely untouched, including their moment estimates and step
/// counters, so disabling a loss term cannot perturb unrelated parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<Option<Tensor>>,
    v: Vec<Option<Tensor>>,
    t: Vec<u64>,
}

impl Adam {
    pub fn new(lr: f64, store: &ParamStore) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![None; store.len()],
            v: vec![None; store.len()],
            t: vec![0; store.len()],
        }
    }

    pub fn step(&mut self, store: &mut ParamStore, grads: &Grads) {
        for id in store.ids().collect::<Vec<_>>() {
            let Some(g) = grads.get(id) else { continue };
            let i = id.0;
            if self.m[i].is_none() {
                self.m[i] = Some(Tensor::zeros(g.raw_dim()));
                self.v[i] = Some(Tensor::zeros(g.raw_dim()));
            }
            self.t[i] += 1;
            let t = self.t[i] as i32;
            let m = self.m[i].as_mut().unwrap();
            let v = self.v[i].as_mut().unwrap();
            m.zip_mut_with(g, |m, &g| *m = self.beta1 * *m + (1.0 - self.beta1) * g);
            v.zip_mut_with(g, |v, &g| *v = self.beta2 * *v + (1.0 - self.beta2) * g * g);
            let bc1 = 1.0 - self.beta1.powi(t);
            let bc2 = 1.0 - self.beta2.powi(t);
            let p = store.get_mut(id);
            ndarray::Zip::from(&mut *p)
                .and(&*m)
                .and(&*v)
                .for_each(|p, &m, &v| {
                    let mhat = m / bc1;
                    let vhat = v / bc2;
                    *p -= self.lr * mhat / (vhat.sqrt() + self.eps);
                });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr1;

    #[test]
    fn single_step_matches_hand_formula() {
        let mut ps = ParamStore::new();
        let id = ps.add("w", arr1(&[1.0]).into_dyn());
        let mut opt = Adam::new(0.1, &ps);
        let mut gr = Grads::new(&ps);
        gr.accum(id, arr1(&[0.5]).into_dyn());
        opt.step(&mut ps, &gr);
        // t=1: mhat = g, vhat = g^2 -> delta = lr * g / (|g| + eps)
        let expected = 1.0 - 0.1 * 0.5 / (0.5 + 1e-8);
        assert!((ps.get(id)[[0]] - expected).abs() < 1e-12);
    }

    #[test]
    fn absent_gradient_leaves_param_and_state_alone() {
        let mut ps = ParamStore::new();
        let a = ps.add("a", arr1(&[1.0]).into_dyn());
        let b = ps.add("b", arr1(&[2.0]).into_dyn());
        let mut opt = Adam::new(0.1, &ps);
        let mut gr = Grads::new(&ps);
        gr.accum(a, arr1(&[1.0]).into_dyn());
        opt.step(&mut ps, &gr);
        assert_ne!(ps.get(a)[[0]], 1.0);
        assert_eq!(ps.get(b)[[0]], 2.0);
        assert_eq!(opt.t[b.0], 0);
    }
}
