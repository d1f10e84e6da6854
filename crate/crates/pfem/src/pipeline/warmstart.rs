//! Warm-start benchmark: per test sample, the same assembled system is
//! solved from a zero guess and from the operator prediction, under identical
//! tolerances and iteration caps. Speedup is the ratio of mean iteration
//! counts (not the mean of ratios).

use super::dataset::{load_dataset, load_references};
use super::evaluate::{predict_instance, relative_error};
use crate::error::{PfemError, Result};
use crate::io::{load_checkpoint, write_json};
use crate::problems::{instantiate, poisson_source, ProblemInstance, ProblemKind};
use pfem_core::fem::{
    apply_dirichlet, assemble_linear_elasticity, assemble_poisson, cg_solve, dense_direct_solve,
    dirichlet_constraints, newton_solve, residual, GuessLabel, MaterialModel, NewtonOptions,
};
use pfem_core::math;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    /// CG stopping tolerance (relative residual).
    pub tol: f64,
    /// Skip warm-start refinement when the prediction's residual is already
    /// below this threshold.
    pub tol_fine: Option<f64>,
    pub max_cg_iter: usize,
    /// Newton stopping tolerance (absolute residual norm).
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub dense_limit: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            tol: 1e-3,
            tol_fine: None,
            max_cg_iter: 200_000,
            newton_tol: 1e-6,
            newton_max_iter: 50,
            dense_limit: 5000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleBench {
    pub sample: String,
    pub n_dofs: usize,
    pub iters_zero: usize,
    pub iters_op: usize,
    pub res0_zero: f64,
    pub res0_op: f64,
    pub err_pre: f64,
    pub err_post: f64,
    pub err_vs_dense: Option<f64>,
    pub skipped: bool,
    pub failed_zero: bool,
    pub failed_op: bool,
    /// Hash of the assembled system shared by both arms.
    pub system_hash: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BenchAggregate {
    pub n_samples: usize,
    pub n_used: usize,
    pub n_failed: usize,
    pub n_skipped: usize,
    pub mean_iters_zero: f64,
    pub mean_iters_op: f64,
    /// mean_iters_zero / mean_iters_op.
    pub speedup: f64,
    pub mean_err_pre: f64,
    pub std_err_pre: f64,
    pub mean_err_post: f64,
    pub max_err_vs_dense: Option<f64>,
    pub tol: f64,
    pub tol_fine: Option<f64>,
}

fn hash_system(k: &pfem_core::fem::SparseMatrixCsr, f: &[f64], constraints: &[(usize, f64)]) -> String {
    let mut h = Sha256::new();
    let (rp, ci, vals) = k.parts();
    for &v in rp {
        h.update((v as u64).to_le_bytes());
    }
    for &v in ci {
        h.update((v as u64).to_le_bytes());
    }
    for &v in vals {
        h.update(v.to_le_bytes());
    }
    for &v in f {
        h.update(v.to_le_bytes());
    }
    for &(d, g) in constraints {
        h.update((d as u64).to_le_bytes());
        h.update(g.to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Benchmark one sample given a prediction and its reference solution.
pub fn bench_sample(
    inst: &ProblemInstance,
    prediction: &[f64],
    reference: &[f64],
    cfg: &BenchConfig,
    id: &str,
) -> Result<SampleBench> {
    match inst.kind {
        ProblemKind::LinearElastic | ProblemKind::Poisson => {
            let (k, f, dofs) = match (&inst.kind, &inst.material) {
                (ProblemKind::Poisson, MaterialModel::Poisson { k }) => {
                    let (kk, f) = assemble_poisson(&inst.mesh, k, &poisson_source())?;
                    (kk, f, 1)
                }
                _ => {
                    let (kk, f) = assemble_linear_elasticity(&inst.mesh, &inst.material, None)?;
                    (kk, f, 2)
                }
            };
            let constraints = dirichlet_constraints(&inst.mesh, dofs)?;
            let sys = apply_dirichlet(&k, &f, &constraints)?;
            let system_hash = hash_system(&k, &f, &constraints);
            let n_free = sys.n_free();
            let zero = vec![0.0; n_free];
            let u0_op = sys.restrict(prediction);

            let rel_res = |u: &[f64]| {
                let ku = sys.reduced_k.matvec_alloc(u);
                let num: f64 =
                    ku.iter().zip(&sys.reduced_f).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
                let den = math::norm2(&sys.reduced_f).max(1e-300);
                num.sqrt() / den
            };
            let res0_zero = rel_res(&zero);
            let res0_op = rel_res(&u0_op);
            let skipped = cfg.tol_fine.map_or(false, |tf| res0_op < tf);

            let (_, report_zero) =
                cg_solve(&sys.reduced_k, &sys.reduced_f, &zero, cfg.tol, cfg.max_cg_iter, GuessLabel::Zero);
            let (uo, iters_op, failed_op) = if skipped {
                (u0_op.clone(), 0usize, false)
            } else {
                let (uo, rep) = cg_solve(
                    &sys.reduced_k,
                    &sys.reduced_f,
                    &u0_op,
                    cfg.tol,
                    cfg.max_cg_iter,
                    GuessLabel::Operator,
                );
                let (iters, failed) = (rep.iterations, !rep.converged);
                (uo, iters, failed)
            };
            let warm_full = sys.reconstruct(&uo);
            let err_vs_dense = if n_free <= cfg.dense_limit {
                let ud = sys.reconstruct(&dense_direct_solve(&sys.reduced_k, &sys.reduced_f)?);
                Some(relative_error(&warm_full, &ud))
            } else {
                None
            };
            Ok(SampleBench {
                sample: id.to_string(),
                n_dofs: n_free,
                iters_zero: report_zero.iterations,
                iters_op,
                res0_zero,
                res0_op,
                err_pre: relative_error(prediction, reference),
                err_post: relative_error(&warm_full, reference),
                err_vs_dense,
                skipped,
                failed_zero: !report_zero.converged,
                failed_op,
                system_hash,
            })
        }
        ProblemKind::NeoHookean => {
            let (_, res_norm_op) = residual(&inst.mesh, &inst.material, prediction)?;
            let zero = vec![0.0; 2 * inst.mesh.n_nodes()];
            let (_, res_norm_zero) = residual(&inst.mesh, &inst.material, &zero)?;
            let skipped = cfg.tol_fine.map_or(false, |tf| res_norm_op < tf);
            let opts = |label| NewtonOptions {
                tol: cfg.newton_tol,
                max_iter: cfg.newton_max_iter,
                load_steps: 1,
                dense_limit: cfg.dense_limit,
                guess_label: label,
            };
            let (uz, report_zero) =
                newton_solve(&inst.mesh, &inst.material, &zero, &opts(GuessLabel::Zero))?;
            let _ = uz;
            let (uo, iters_op, failed_op) = if skipped {
                (prediction.to_vec(), 0usize, false)
            } else {
                let (uo, rep) =
                    newton_solve(&inst.mesh, &inst.material, prediction, &opts(GuessLabel::Operator))?;
                (uo, rep.iterations, !rep.converged)
            };
            // system identity for the nonlinear case: hash the external load
            // and constraints (the tangent depends on the iterate)
            let f_ext = pfem_core::fem::assemble_external_force(&inst.mesh, None);
            let constraints = dirichlet_constraints(&inst.mesh, 2)?;
            let mut h = Sha256::new();
            for v in &f_ext {
                h.update(v.to_le_bytes());
            }
            for (d, g) in &constraints {
                h.update((*d as u64).to_le_bytes());
                h.update(g.to_le_bytes());
            }
            let system_hash: String = h.finalize().iter().map(|b| format!("{b:02x}")).collect();
            Ok(SampleBench {
                sample: id.to_string(),
                n_dofs: 2 * inst.mesh.n_nodes(),
                iters_zero: report_zero.iterations,
                iters_op,
                res0_zero: res_norm_zero,
                res0_op: res_norm_op,
                err_pre: relative_error(prediction, reference),
                err_post: relative_error(&uo, reference),
                err_vs_dense: None,
                skipped,
                failed_zero: !report_zero.converged,
                failed_op,
                system_hash,
            })
        }
    }
}

/// Run the benchmark over a dataset with a trained checkpoint.
pub fn warmstart_bench(
    ckpt: &Path,
    data_dir: &Path,
    cfg: &BenchConfig,
    out: Option<&Path>,
    threads: usize,
) -> Result<(BenchAggregate, Vec<SampleBench>)> {
    let (config, store) = load_checkpoint(ckpt)?;
    let ds = load_dataset(data_dir)?;
    let refs = load_references(data_dir, &ds.ids)?;
    let bench_one = |i: usize| -> Result<Option<SampleBench>> {
        let Some(r) = &refs[i] else {
            return Ok(None);
        };
        let inst = instantiate(&ds.spec, &ds.base_mesh, &ds.samples[i])?;
        let pred = predict_instance(&store, &config, &inst)?;
        bench_sample(&inst, &pred, &r.u, cfg, &ds.ids[i]).map(Some)
    };
    let results: Vec<Result<Option<SampleBench>>> = if threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| PfemError::Usage(e.to_string()))?;
        pool.install(|| {
            use rayon::prelude::*;
            (0..ds.samples.len()).into_par_iter().map(bench_one).collect()
        })
    } else {
        (0..ds.samples.len()).map(bench_one).collect()
    };
    let mut rows = Vec::new();
    for r in results {
        if let Some(row) = r? {
            rows.push(row);
        }
    }
    let aggregate = aggregate_rows(&rows, cfg);
    if let Some(out) = out {
        std::fs::create_dir_all(out)?;
        let mut csv = String::from(
            "sample,n_dofs,iters_zero,iters_op,res0_zero,res0_op,err_pre,err_post,err_vs_dense,skipped,failed_zero,failed_op,system_hash\n",
        );
        for r in &rows {
            csv.push_str(&format!(
                "{},{},{},{},{:.6e},{:.6e},{:.6e},{:.6e},{},{},{},{},{}\n",
                r.sample,
                r.n_dofs,
                r.iters_zero,
                r.iters_op,
                r.res0_zero,
                r.res0_op,
                r.err_pre,
                r.err_post,
                r.err_vs_dense.map_or(String::new(), |v| format!("{v:.6e}")),
                r.skipped,
                r.failed_zero,
                r.failed_op,
                r.system_hash,
            ));
        }
        std::fs::write(out.join("bench.csv"), csv)?;
        write_json(&out.join("bench.json"), &aggregate)?;
    }
    Ok((aggregate, rows))
}

fn aggregate_rows(rows: &[SampleBench], cfg: &BenchConfig) -> BenchAggregate {
    let used: Vec<&SampleBench> =
        rows.iter().filter(|r| !r.failed_zero && !r.failed_op).collect();
    let n_used = used.len();
    let mean = |f: &dyn Fn(&SampleBench) -> f64| -> f64 {
        if n_used == 0 {
            return f64::NAN;
        }
        used.iter().map(|r| f(r)).sum::<f64>() / n_used as f64
    };
    let mean_iters_zero = mean(&|r| r.iters_zero as f64);
    let mean_iters_op = mean(&|r| r.iters_op as f64);
    let mean_err_pre = mean(&|r| r.err_pre);
    let var_pre = if n_used == 0 {
        f64::NAN
    } else {
        used.iter().map(|r| (r.err_pre - mean_err_pre).powi(2)).sum::<f64>() / n_used as f64
    };
    BenchAggregate {
        n_samples: rows.len(),
        n_used,
        n_failed: rows.len() - n_used,
        n_skipped: rows.iter().filter(|r| r.skipped).count(),
        mean_iters_zero,
        mean_iters_op,
        speedup: mean_iters_zero / mean_iters_op,
        mean_err_pre,
        std_err_pre: var_pre.sqrt(),
        mean_err_post: mean(&|r| r.err_post),
        max_err_vs_dense: used
            .iter()
            .filter_map(|r| r.err_vs_dense)
            .fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.max(v)))),
        tol: cfg.tol,
        tol_fine: cfg.tol_fine,
    }
}
