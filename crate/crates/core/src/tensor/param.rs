//! Flat parameter store: named tensors backed by one contiguous f64 vector.

use super::Tensor;
use crate::error::{Error, Result};
use crate::math;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

/// Named parameter tensors with a single flat view. Registration order is the
/// layout order, so identical construction sequences give identical layouts.
#[derive(Debug, Clone)]
pub struct ParamStore {
    entries: Vec<ParamEntry>,
    data: Vec<f64>,
    seed: u64,
    rng: ChaCha8Rng,
}

impl ParamStore {
    pub fn new(seed: u64) -> Self {
        ParamStore { entries: Vec::new(), data: Vec::new(), seed, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Register a tensor initialized uniformly in `[-1/sqrt(fan_in), +1/sqrt(fan_in)]`.
    pub fn add_uniform(&mut self, name: &str, shape: &[usize], fan_in: usize) -> usize {
        let bound = 1.0 / math::sqrt(fan_in.max(1) as f64);
        let n: usize = shape.iter().product();
        let offset = self.data.len();
        for _ in 0..n {
            let u = uniform_unit(&mut self.rng);
            self.data.push((2.0 * u - 1.0) * bound);
        }
        self.entries.push(ParamEntry { name: name.into(), shape: shape.to_vec(), offset });
        self.entries.len() - 1
    }

    /// Register a tensor filled with a constant.
    pub fn add_const(&mut self, name: &str, shape: &[usize], value: f64) -> usize {
        let n: usize = shape.iter().product();
        let offset = self.data.len();
        self.data.extend(core::iter::repeat(value).take(n));
        self.entries.push(ParamEntry { name: name.into(), shape: shape.to_vec(), offset });
        self.entries.len() - 1
    }

    pub fn slot(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.name == name)
    }

    pub fn entries(&self) -> &[ParamEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub(crate) fn slot_span(&self, slot: usize) -> (usize, usize) {
        let e = &self.entries[slot];
        (e.offset, e.shape.iter().product())
    }

    /// Clone a slot's values into a tensor.
    pub fn tensor(&self, slot: usize) -> Tensor {
        let (offset, n) = self.slot_span(slot);
        Tensor::new(self.entries[slot].shape.clone(), self.data[offset..offset + n].to_vec())
            .expect("store entry is consistent")
    }

    pub fn flat(&self) -> &[f64] {
        &self.data
    }

    pub fn flat_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Replace the flat vector (e.g. from a checkpoint); length must match.
    pub fn set_flat(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.data.len() {
            return Err(Error::ShapeMismatch {
                op: "set_flat",
                detail: format!("store holds {} values, got {}", self.data.len(), values.len()),
            });
        }
        self.data.copy_from_slice(values);
        Ok(())
    }

    /// Name of the parameter owning a flat index.
    pub fn name_at(&self, flat_index: usize) -> &str {
        for e in self.entries.iter().rev() {
            if flat_index >= e.offset {
                return &e.name;
            }
        }
        ""
    }
}

#[inline]
fn uniform_unit(rng: &mut ChaCha8Rng) -> f64 {
    // 53 random mantissa bits -> [0, 1)
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
