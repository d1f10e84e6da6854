//! Dataset directory layout:
//! `problem.json` (resolved spec + sample count), `meshes/mesh_0000.json`,
//! `samples/NNNN.json`, and — written only by the reference stage —
//! `refs/NNNN.json`. Training never reads the refs directory.

use crate::error::{PfemError, Result};
use crate::io::{self, write_json};
use crate::problems::{draw_sample, ProblemSpec, SampleData};
use pfem_core::fem::SolveReport;
use pfem_core::mesh::Mesh;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    spec: ProblemSpec,
    n_samples: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct GenSummary {
    pub n_samples: usize,
    pub mesh_files: Vec<String>,
    pub out_dir: PathBuf,
}

pub fn sample_id(index: usize) -> String {
    format!("{index:04}")
}

/// Generate `n` samples under `out`. Deterministic in (spec.seed, n).
pub fn generate_dataset(spec: &ProblemSpec, n: usize, out: &Path) -> Result<GenSummary> {
    spec.validate()?;
    let sm = spec.base_mesh()?;
    std::fs::create_dir_all(out.join("samples"))?;
    std::fs::create_dir_all(out.join("meshes"))?;
    let mesh_file = "meshes/mesh_0000.json".to_string();
    crate::io::save_mesh(&sm.mesh, &out.join(&mesh_file))?;
    write_json(&out.join("problem.json"), &ProblemFile { spec: spec.clone(), n_samples: n })?;
    for i in 0..n {
        let sample = draw_sample(spec, &sm, &mesh_file, i as u64)?;
        write_json(&out.join("samples").join(format!("{}.json", sample_id(i))), &sample)?;
    }
    Ok(GenSummary { n_samples: n, mesh_files: vec![mesh_file], out_dir: out.to_path_buf() })
}

/// A dataset loaded into memory. The base mesh carries no boundary tags;
/// samples bind their own.
pub struct Dataset {
    pub spec: ProblemSpec,
    pub base_mesh: Mesh,
    pub samples: Vec<SampleData>,
    pub ids: Vec<String>,
    pub root: PathBuf,
}

pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let pf: ProblemFile = io::read_json(&dir.join("problem.json"))?;
    let mut samples = Vec::with_capacity(pf.n_samples);
    let mut ids = Vec::with_capacity(pf.n_samples);
    let mut base_mesh: Option<(String, Mesh)> = None;
    for i in 0..pf.n_samples {
        let id = sample_id(i);
        let sample: SampleData = io::read_json(&dir.join("samples").join(format!("{id}.json")))?;
        match &base_mesh {
            Some((file, _)) if *file == sample.mesh_file => {}
            Some(_) => {
                return Err(PfemError::Schema(
                    "samples reference multiple base meshes; expected one".into(),
                ))
            }
            None => {
                let mesh = crate::io::load_mesh(&dir.join(&sample.mesh_file))?;
                base_mesh = Some((sample.mesh_file.clone(), mesh));
            }
        }
        samples.push(sample);
        ids.push(id);
    }
    let base_mesh = base_mesh
        .map(|(_, m)| m)
        .ok_or_else(|| PfemError::Schema("dataset holds no samples".into()))?;
    Ok(Dataset { spec: pf.spec, base_mesh, samples, ids, root: dir.to_path_buf() })
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceFile {
    pub u: Vec<f64>,
    pub report: SolveReport,
}

/// Load references for the given ids; missing files come back as `None`.
pub fn load_references(dir: &Path, ids: &[String]) -> Result<Vec<Option<ReferenceFile>>> {
    let mut out = Vec::with_capacity(ids.len());
    for id in ids {
        let path = dir.join("refs").join(format!("{id}.json"));
        if path.exists() {
            out.push(Some(io::read_json(&path)?));
        } else {
            out.push(None);
        }
    }
    Ok(out)
}
