//! High-fidelity reference solutions, stored apart from the training inputs.

use super::dataset::{sample_id, ReferenceFile};
use crate::error::Result;
use crate::io::write_json;
use crate::problems::{instantiate, poisson_source, ProblemInstance, ProblemKind};
use pfem_core::fem::{
    apply_dirichlet, assemble_linear_elasticity, assemble_poisson, cg_solve, dense_direct_solve,
    dirichlet_constraints, newton_solve, GuessLabel, NewtonOptions, SolveReport,
};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Serialize, Deserialize)]
pub struct RefSummary {
    pub n: usize,
    pub failures: Vec<String>,
}

const DENSE_LIMIT: usize = 5000;

/// Solve one instance at reference fidelity. Linear problems use the dense
/// direct solver (CG at 1e-12 beyond the dense limit); hyperelastic problems
/// run Newton with load stepping to a 1e-10 residual.
pub fn solve_reference(inst: &ProblemInstance) -> Result<(Vec<f64>, SolveReport)> {
    match inst.kind {
        ProblemKind::LinearElastic | ProblemKind::Poisson => {
            let (k, f, dofs) = match inst.kind {
                ProblemKind::LinearElastic => {
                    let (k, f) = assemble_linear_elasticity(&inst.mesh, &inst.material, None)?;
                    (k, f, 2)
                }
                _ => {
                    let (k, f) = match &inst.material {
                        pfem_core::fem::MaterialModel::Poisson { k } => {
                            assemble_poisson(&inst.mesh, k, &poisson_source())?
                        }
                        _ => unreachable!("poisson kind carries a poisson material"),
                    };
                    (k, f, 1)
                }
            };
            let sys = apply_dirichlet(&k, &f, &dirichlet_constraints(&inst.mesh, dofs)?)?;
            if sys.n_free() <= DENSE_LIMIT {
                let u_red = dense_direct_solve(&sys.reduced_k, &sys.reduced_f)?;
                let u = sys.reconstruct(&u_red);
                let r = {
                    let ku = sys.reduced_k.matvec_alloc(&u_red);
                    let num: f64 =
                        ku.iter().zip(&sys.reduced_f).map(|(a, b)| (a - b) * (a - b)).sum();
                    let den: f64 = sys.reduced_f.iter().map(|v| v * v).sum();
                    (num / den.max(1e-300)).sqrt()
                };
                let report = SolveReport {
                    iterations: 0,
                    residual_history: vec![r],
                    converged: true,
                    tol: 1e-12,
                    initial_guess_label: GuessLabel::Custom,
                };
                Ok((u, report))
            } else {
                let zero = vec![0.0; sys.n_free()];
                let (u_red, report) = cg_solve(
                    &sys.reduced_k,
                    &sys.reduced_f,
                    &zero,
                    1e-12,
                    20 * sys.n_free(),
                    GuessLabel::Zero,
                );
                Ok((sys.reconstruct(&u_red), report))
            }
        }
        ProblemKind::NeoHookean => {
            let opts = NewtonOptions {
                tol: 1e-10,
                max_iter: 80,
                load_steps: 4,
                dense_limit: DENSE_LIMIT,
                guess_label: GuessLabel::Zero,
            };
            let u0 = vec![0.0; 2 * inst.mesh.n_nodes()];
            let (u, report) = newton_solve(&inst.mesh, &inst.material, &u0, &opts)?;
            Ok((u, report))
        }
    }
}

/// Compute and store references for every sample in a dataset directory.
pub fn compute_references(dir: &Path, threads: usize) -> Result<RefSummary> {
    let ds = super::load_dataset(dir)?;
    std::fs::create_dir_all(dir.join("refs"))?;
    let solve_one = |i: usize| -> Result<(String, ReferenceFile)> {
        let inst = instantiate(&ds.spec, &ds.base_mesh, &ds.samples[i])?;
        let (u, report) = solve_reference(&inst)?;
        Ok((sample_id(i), ReferenceFile { u, report }))
    };
    let results: Vec<Result<(String, ReferenceFile)>> = if threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| crate::error::PfemError::Usage(e.to_string()))?;
        pool.install(|| {
            use rayon::prelude::*;
            (0..ds.samples.len()).into_par_iter().map(solve_one).collect()
        })
    } else {
        (0..ds.samples.len()).map(solve_one).collect()
    };
    let mut failures = Vec::new();
    for (i, res) in results.into_iter().enumerate() {
        let (id, file) = res?;
        if !file.report.converged {
            failures.push(id.clone());
        }
        write_json(&dir.join("refs").join(format!("{id}.json")), &file)?;
        debug_assert_eq!(id, sample_id(i));
    }
    Ok(RefSummary { n: ds.samples.len(), failures })
}
