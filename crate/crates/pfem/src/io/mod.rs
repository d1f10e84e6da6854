//! File formats: mesh JSON, operator checkpoints, and solver reports.

mod checkpoint;
mod mesh_json;
mod reports;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointHeader};
pub use mesh_json::{load_mesh, save_mesh};
pub use reports::{residual_history_csv, write_json, write_solve_report};

use crate::error::{PfemError, Result};
use std::path::Path;

/// Read and deserialize a JSON file, attributing parse errors to the path.
pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|source| PfemError::Json { file: path.display().to_string(), source })
}
