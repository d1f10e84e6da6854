//! Checkpoint format: one JSON header line (parameter names/shapes, seed,
//! operator config and its hash), then the flat parameter vector as
//! little-endian f64.

use crate::error::{PfemError, Result};
use pfem_core::operator::{register_params, TransolverConfig};
use pfem_core::tensor::ParamStore;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub schema_version: u32,
    pub seed: u64,
    pub config: TransolverConfig,
    pub config_hash: String,
    pub params: Vec<ParamDecl>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ParamDecl {
    pub name: String,
    pub shape: Vec<usize>,
}

pub fn config_hash(config: &TransolverConfig) -> String {
    let text = serde_json::to_string(config).expect("config serializes");
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    hex_string(&hasher.finalize())
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn save_checkpoint(path: &Path, store: &ParamStore, config: &TransolverConfig) -> Result<()> {
    let header = CheckpointHeader {
        schema_version: 1,
        seed: store.seed(),
        config: *config,
        config_hash: config_hash(config),
        params: store
            .entries()
            .iter()
            .map(|e| ParamDecl { name: e.name.clone(), shape: e.shape.clone() })
            .collect(),
    };
    let mut file = std::fs::File::create(path)?;
    serde_json::to_writer(&mut file, &header)
        .map_err(|source| PfemError::Json { file: path.display().to_string(), source })?;
    file.write_all(b"\n")?;
    let mut buf = Vec::with_capacity(store.len() * 8);
    for v in store.flat() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    file.write_all(&buf)?;
    Ok(())
}

/// Load a checkpoint: rebuilds the parameter layout from the stored config
/// and seed, verifies it against the header, and restores the flat vector
/// bit-exactly.
pub fn load_checkpoint(path: &Path) -> Result<(TransolverConfig, ParamStore)> {
    let file = std::fs::File::open(path)?;
    let mut reader = BufReader::new(file);
    let mut header_line = String::new();
    reader.read_line(&mut header_line)?;
    let header: CheckpointHeader = serde_json::from_str(&header_line)
        .map_err(|source| PfemError::Json { file: path.display().to_string(), source })?;
    if header.config_hash != config_hash(&header.config) {
        return Err(PfemError::Schema(format!(
            "{}: config hash mismatch",
            path.display()
        )));
    }
    let mut store = register_params(&header.config, header.seed)?;
    let declared: Vec<ParamDecl> = store
        .entries()
        .iter()
        .map(|e| ParamDecl { name: e.name.clone(), shape: e.shape.clone() })
        .collect();
    if declared != header.params {
        return Err(PfemError::Schema(format!(
            "{}: parameter layout does not match the stored config",
            path.display()
        )));
    }
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    if bytes.len() != store.len() * 8 {
        return Err(PfemError::Schema(format!(
            "{}: expected {} parameter bytes, found {}",
            path.display(),
            store.len() * 8,
            bytes.len()
        )));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    store.set_flat(&values)?;
    Ok((header.config, store))
}
