//! Transolver-style neural operator on point clouds: pointwise MLP embedding,
//! stacked physics-attention layers (slice to S tokens, attend, deslice), and
//! an MLP decoder to per-point outputs.
//!
//! Point order is canonicalized internally (rows sorted by total_cmp
//! lexicographic comparison) so every reduction sums in a fixed order and the
//! forward pass is bitwise permutation-equivariant.

mod model;

pub use model::{
    forward, physics_attention, predict, register_params, slice_tokens, LayerTrace, OperatorRun,
    PhysicsAttentionState,
};

use crate::error::{Error, Result};
use alloc::format;

/// Architecture hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TransolverConfig {
    pub num_layers: usize,
    /// Physics-aware token count S.
    pub num_tokens: usize,
    /// Feature channels C.
    pub channels: usize,
    pub heads: usize,
    pub mlp_ratio: usize,
    pub in_features: usize,
    pub out_features: usize,
}

impl TransolverConfig {
    /// Desk-scale default: 3 layers, 16 tokens, 64 channels, 4 heads.
    pub fn desk_default(in_features: usize, out_features: usize) -> Self {
        TransolverConfig {
            num_layers: 3,
            num_tokens: 16,
            channels: 64,
            heads: 4,
            mlp_ratio: 2,
            in_features,
            out_features,
        }
    }

    pub fn head_dim(&self) -> usize {
        self.channels / self.heads
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_tokens == 0 {
            return Err(Error::Invalid("num_tokens must be at least 1".into()));
        }
        if self.channels == 0 || self.heads == 0 || self.channels % self.heads != 0 {
            return Err(Error::Invalid(format!(
                "channels ({}) must be a positive multiple of heads ({})",
                self.channels, self.heads
            )));
        }
        if self.in_features == 0 || self.out_features == 0 {
            return Err(Error::Invalid("feature widths must be positive".into()));
        }
        if self.mlp_ratio == 0 {
            return Err(Error::Invalid("mlp_ratio must be at least 1".into()));
        }
        Ok(())
    }
}
