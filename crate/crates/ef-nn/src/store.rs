//! Named parameter registry and the gradient buffer that mirrors it.

use ndarray::ArrayD;
use serde::{Deserialize, Serialize};

use crate::{NnError, Tensor};

/// Handle into a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParamId(pub usize);

/// Flat registry of named parameter tensors.
///
/// Networks register their weights here at construction and keep only
/// `ParamId` handles. Optimizers, EMA target updates, checkpointing and
/// finite-difference probes all operate on the store, so every consumer
/// agrees on parameter identity.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    entries: Vec<Tensor>,
    names: Vec<String>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        self.entries.push(value);
        self.names.push(name.into());
        ParamId(self.entries.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.entries[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn ids_with_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = ParamId> + 'a {
        self.names
            .iter()
            .enumerate()
            .filter(move |(_, n)| n.starts_with(prefix))
            .map(|(i, _)| ParamId(i))
    }

    /// Total number of scalar parameters.
    pub fn num_scalars(&self) -> usize {
        self.entries.iter().map(|e| e.len()).sum()
    }

    /// `self = (1 - tau) * self + tau * src`, entrywise. Layouts must match.
    pub fn ema_from(&mut self, src: &ParamStore, tau: f64) {
        assert_eq!(self.entries.len(), src.entries.len(), "store layout mismatch");
        for (dst, s) in self.entries.iter_mut().zip(&src.entries) {
            dst.zip_mut_with(s, |d, &s| *d = (1.0 - tau) * *d + tau * s);
        }
    }

    /// Hard copy of all values from `src` (layouts must match).
    pub fn copy_from(&mut self, src: &ParamStore) {
        assert_eq!(self.entries.len(), src.entries.len(), "store layout mismatch");
        for (dst, s) in self.entries.iter_mut().zip(&src.entries) {
            dst.assign(s);
        }
    }

    pub fn snapshot(&self) -> StoreSnapshot {
        StoreSnapshot {
            tensors: self
                .names
                .iter()
                .zip(&self.entries)
                .map(|(n, e)| NamedTensor {
                    name: n.clone(),
                    shape: e.shape().to_vec(),
                    data: e.iter().copied().collect(),
                })
                .collect(),
        }
    }

    /// Restore values from a snapshot. Names and shapes must match the
    /// registration order of this store.
    pub fn restore(&mut self, snap: &StoreSnapshot) -> Result<(), NnError> {
        if snap.tensors.len() != self.entries.len() {
            return Err(NnError::SnapshotMismatch(format!(
                "expected {} tensors, snapshot has {}",
                self.entries.len(),
                snap.tensors.len()
            )));
        }
        for (i, t) in snap.tensors.iter().enumerate() {
            if t.name != self.names[i] {
                return Err(NnError::SnapshotMismatch(format!(
                    "tensor {i}: expected name {:?}, got {:?}",
                    self.names[i], t.name
                )));
            }
            if t.shape != self.entries[i].shape() {
                return Err(NnError::SnapshotMismatch(format!(
                    "tensor {:?}: expected shape {:?}, got {:?}",
                    t.name,
                    self.entries[i].shape(),
                    t.shape
                )));
            }
            self.entries[i] = ArrayD::from_shape_vec(t.shape.clone(), t.data.clone())
                .map_err(|e| NnError::SnapshotMismatch(e.to_string()))?;
        }
        Ok(())
    }
}

/// Serializable (name, shape, data) triple.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// Serializable image of a whole store.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct StoreSnapshot {
    pub tensors: Vec<NamedTensor>,
}

/// Gradient buffer parallel to a [`ParamStore`].
///
/// Slots start empty; a slot that stays empty means "no gradient reached this
/// parameter", which downstream consumers (Adam, isolation checks) treat
/// differently from an explicit zero.
#[derive(Debug, Clone)]
pub struct Grads {
    slots: Vec<Option<Tensor>>,
}

impl Grads {
    pub fn new(store: &ParamStore) -> Self {
        Self {
            slots: vec![None; store.len()],
        }
    }

    pub fn accum(&mut self, id: ParamId, g: Tensor) {
        match &mut self.slots[id.0] {
            Some(existing) => *existing += &g,
            slot @ None => *slot = Some(g),
        }
    }

    pub fn get(&self, id: ParamId) -> Option<&Tensor> {
        self.slots[id.0].as_ref()
    }

    pub fn is_set(&self, id: ParamId) -> bool {
        self.slots[id.0].is_some()
    }

    /// Multiply every present gradient by `s`.
    pub fn scale(&mut self, s: f64) {
        for slot in self.slots.iter_mut().flatten() {
            slot.mapv_inplace(|g| g * s);
        }
    }

    /// `self += s * other` over present slots of `other`.
    pub fn add_scaled(&mut self, other: &Grads, s: f64) {
        assert_eq!(self.slots.len(), other.slots.len(), "grad layout mismatch");
        for (i, slot) in other.slots.iter().enumerate() {
            if let Some(g) = slot {
                let mut scaled = g.clone();
                scaled.mapv_inplace(|v| v * s);
                self.accum(ParamId(i), scaled);
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.slots
            .iter()
            .flatten()
            .flat_map(|g| g.iter())
            .fold(0.0f64, |acc, &v| acc.max(v.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.slots
            .iter()
            .flatten()
            .all(|g| g.iter().all(|v| v.is_finite()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr1;

    #[test]
    fn ema_matches_lerp() {
        let mut a = ParamStore::new();
        let id = a.add("w", arr1(&[1.0, 2.0]).into_dyn());
        let mut b = a.clone();
        *b.get_mut(id) = arr1(&[3.0, 6.0]).into_dyn();
        a.ema_from(&b, 0.25);
        assert_eq!(a.get(id).as_slice().unwrap(), &[1.5, 3.0]);
    }

    #[test]
    fn snapshot_roundtrip_and_validation() {
        let mut s = ParamStore::new();
        s.add("enc.w", arr1(&[0.5, -0.5]).into_dyn());
        let snap = s.snapshot();
        let mut t = s.clone();
        *t.get_mut(ParamId(0)) = arr1(&[9.0, 9.0]).into_dyn();
        t.restore(&snap).unwrap();
        assert_eq!(t.get(ParamId(0)), s.get(ParamId(0)));

        let mut wrong = ParamStore::new();
        wrong.add("dec.w", arr1(&[0.0, 0.0]).into_dyn());
        assert!(wrong.restore(&snap).is_err());
    }

    #[test]
    fn grads_accumulate_and_scale() {
        let mut s = ParamStore::new();
        let id = s.add("w", arr1(&[0.0]).into_dyn());
        let mut g = Grads::new(&s);
        assert!(!g.is_set(id));
        g.accum(id, arr1(&[2.0]).into_dyn());
        g.accum(id, arr1(&[3.0]).into_dyn());
        g.scale(0.5);
        assert_eq!(g.get(id).unwrap().as_slice().unwrap(), &[2.5]);
    }
}
