//! Evaluation of a trained operator against stored FEM references.

use super::dataset::{load_dataset, load_references};
use crate::error::{PfemError, Result};
use crate::io::{load_checkpoint, write_json};
use crate::problems::{instantiate, ProblemInstance};
use pfem_core::operator::{forward, TransolverConfig};
use pfem_core::tensor::ParamStore;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Prediction on one instance: forward pass plus the hard-BC ansatz, giving
/// the full nodal vector.
pub fn predict_instance(
    store: &ParamStore,
    config: &TransolverConfig,
    inst: &ProblemInstance,
) -> Result<Vec<f64>> {
    let run = forward(&inst.features, store, config).map_err(PfemError::Core)?;
    inst.ansatz.apply(run.output()).map_err(PfemError::Core)
}

/// Relative L2 error over the stacked nodal dof vector.
pub fn relative_error(pred: &[f64], reference: &[f64]) -> f64 {
    let num: f64 = pred.iter().zip(reference).map(|(a, b)| (a - b) * (a - b)).sum();
    let den: f64 = reference.iter().map(|v| v * v).sum();
    if den == 0.0 {
        return if num == 0.0 { 0.0 } else { 1.0 };
    }
    (num / den).sqrt()
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EvalStats {
    pub n_evaluated: usize,
    pub n_missing_refs: usize,
    pub mean: f64,
    pub std: f64,
    pub per_sample: Vec<(String, f64)>,
}

/// Evaluate a checkpoint on a dataset (refs must exist); optionally writes
/// eval.json and eval.csv under `out`.
pub fn evaluate(ckpt: &Path, data_dir: &Path, out: Option<&Path>) -> Result<EvalStats> {
    let (config, store) = load_checkpoint(ckpt)?;
    let ds = load_dataset(data_dir)?;
    if config.in_features != ds.spec.in_features() || config.out_features != ds.spec.out_features()
    {
        return Err(PfemError::Schema(format!(
            "checkpoint expects {}->{} features, dataset needs {}->{}",
            config.in_features,
            config.out_features,
            ds.spec.in_features(),
            ds.spec.out_features()
        )));
    }
    let refs = load_references(data_dir, &ds.ids)?;
    let mut per_sample = Vec::new();
    let mut missing = 0usize;
    for ((sample, id), r) in ds.samples.iter().zip(&ds.ids).zip(&refs) {
        match r {
            Some(r) => {
                let inst = instantiate(&ds.spec, &ds.base_mesh, sample)?;
                let pred = predict_instance(&store, &config, &inst)?;
                per_sample.push((id.clone(), relative_error(&pred, &r.u)));
            }
            None => {
                eprintln!("warning: no reference for sample {id}, skipped");
                missing += 1;
            }
        }
    }
    let n = per_sample.len();
    let mean = per_sample.iter().map(|(_, e)| e).sum::<f64>() / n.max(1) as f64;
    let var = per_sample.iter().map(|(_, e)| (e - mean) * (e - mean)).sum::<f64>()
        / n.max(1) as f64;
    let stats = EvalStats {
        n_evaluated: n,
        n_missing_refs: missing,
        mean,
        std: var.sqrt(),
        per_sample,
    };
    if let Some(out) = out {
        std::fs::create_dir_all(out)?;
        write_json(&out.join("eval.json"), &stats)?;
        let mut csv = String::from("sample,relative_error\n");
        for (id, e) in &stats.per_sample {
            csv.push_str(&format!("{id},{e:.10e}\n"));
        }
        std::fs::write(out.join("eval.csv"), csv)?;
    }
    Ok(stats)
}
