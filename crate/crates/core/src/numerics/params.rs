use indexmap::IndexMap;

use super::tape::Gradients;
use super::tensor::Tensor;
use crate::error::{Result, SculptError};

/// State kept per trainable tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamEntry {
    pub value: Tensor,
    pub grad: Tensor,
    /// Adam first moment.
    pub m: Tensor,
    /// Adam second moment.
    pub v: Tensor,
    /// Exponential moving average of `value`.
    pub ema: Tensor,
}

/// Ordered collection of named trainable tensors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParameterStore {
    entries: IndexMap<String, ParamEntry>,
}

impl ParameterStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a tensor. The EMA shadow starts as a copy of the value.
    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) -> Result<usize> {
        let name = name.into();
        if self.entries.contains_key(&name) {
            return Err(SculptError::config(format!("duplicate parameter name {name:?}")));
        }
        let zeros = Tensor::zeros(value.shape());
        let entry = ParamEntry {
            grad: zeros.clone(),
            m: zeros.clone(),
            v: zeros,
            ema: value.clone(),
            value,
        };
        let (index, _) = self.entries.insert_full(name, entry);
        Ok(index)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.entries.get_index_of(name)
    }

    pub fn name_at(&self, index: usize) -> &str {
        self.entries.get_index(index).map(|(k, _)| k.as_str()).expect("parameter index")
    }

    pub fn value_at(&self, index: usize) -> &Tensor {
        &self.entries[index].value
    }

    pub fn value_at_mut(&mut self, index: usize) -> &mut Tensor {
        &mut self.entries[index].value
    }

    pub fn get(&self, name: &str) -> Option<&ParamEntry> {
        self.entries.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut ParamEntry> {
        self.entries.get_mut(name)
    }

    pub fn entry_at(&self, index: usize) -> &ParamEntry {
        &self.entries[index]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &ParamEntry)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut ParamEntry)> {
        self.entries.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    /// Total number of scalar parameters.
    pub fn element_count(&self) -> usize {
        self.entries.values().map(|e| e.value.len()).sum()
    }

    /// Adds `weight * gradient` into the grad slots.
    pub fn accumulate(&mut self, grads: &Gradients, weight: f64) {
        for (index, g) in grads.params() {
            let slot = self.entries[index].grad.data_mut();
            for (s, v) in slot.iter_mut().zip(g.data()) {
                *s += weight * v;
            }
        }
    }

    /// Adds raw per-parameter gradients (indexed like the store).
    pub fn accumulate_dense(&mut self, grads: &[Tensor], weight: f64) {
        for (entry, g) in self.entries.values_mut().zip(grads) {
            for (s, v) in entry.grad.data_mut().iter_mut().zip(g.data()) {
                *s += weight * v;
            }
        }
    }

    pub fn zero_grads(&mut self) {
        for e in self.entries.values_mut() {
            e.grad.fill(0.0);
        }
    }

    /// Resets every EMA shadow to the current value.
    pub fn reset_ema(&mut self) {
        for e in self.entries.values_mut() {
            e.ema = e.value.clone();
        }
    }

    /// A store whose values are the EMA shadows of this one.
    pub fn ema_weights(&self) -> ParameterStore {
        let mut out = self.clone();
        for e in out.entries.values_mut() {
            e.value = e.ema.clone();
        }
        out
    }

    /// Gradient slots as a dense vector of tensors in store order.
    pub fn dense_grads(&self, grads: &Gradients) -> Vec<Tensor> {
        let mut out: Vec<Tensor> = self
            .entries
            .values()
            .map(|e| Tensor::zeros(e.value.shape()))
            .collect();
        for (index, g) in grads.params() {
            out[index].data_mut().copy_from_slice(g.data());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_unique_and_ordered() {
        let mut s = ParameterStore::new();
        assert_eq!(s.insert("a", Tensor::zeros(&[2, 2])).unwrap(), 0);
        assert_eq!(s.insert("b", Tensor::zeros(&[1, 3])).unwrap(), 1);
        assert!(s.insert("a", Tensor::zeros(&[1])).is_err());
        assert_eq!(s.name_at(1), "b");
        assert_eq!(s.element_count(), 7);
        let e = s.get("b").unwrap();
        assert_eq!(e.m.shape(), e.value.shape());
        assert_eq!(e.ema.shape(), e.value.shape());
    }
}
