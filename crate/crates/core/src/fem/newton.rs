//! Newton-Raphson for the total-Lagrangian system, with optional load
//! stepping and warm starts. Plain Newton (no line search); divergence is
//! reported, not damped.

use super::cg::{cg_solve, GuessLabel, SolveReport};
use super::dense::dense_direct_solve;
use super::dirichlet::{apply_dirichlet, dirichlet_constraints};
use super::material::MaterialModel;
use super::neohookean::{internal_force_neohookean, tangent_neohookean};
use super::assemble::assemble_external_force;
use crate::error::{Error, Result};
use crate::math;
use crate::mesh::Mesh;
use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    /// Absolute tolerance on the free-dof residual norm.
    pub tol: f64,
    pub max_iter: usize,
    pub load_steps: usize,
    /// Tangent systems at or below this size use the dense solver, else CG.
    pub dense_limit: usize,
    pub guess_label: GuessLabel,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-6,
            max_iter: 50,
            load_steps: 1,
            dense_limit: 5000,
            guess_label: GuessLabel::Custom,
        }
    }
}

/// Solve f_int(u) = f_ext with Newton iteration. `u0` is a full-length
/// initial guess (prescribed dofs are overwritten). The report counts Newton
/// iterations across all load steps and records ||r|| per evaluation.
/// Divergence (5 consecutive residual increases) and element inversion end
/// the solve with `converged = false`.
pub fn newton_solve(
    mesh: &Mesh,
    material: &MaterialModel,
    u0: &[f64],
    opts: &NewtonOptions,
) -> Result<(Vec<f64>, SolveReport)> {
    if opts.load_steps == 0 {
        return Err(Error::Invalid("load_steps must be at least 1".into()));
    }
    let n_dofs = 2 * mesh.n_nodes();
    if u0.len() != n_dofs {
        return Err(Error::Invalid(alloc::format!(
            "initial guess has {} entries for {n_dofs} dofs",
            u0.len()
        )));
    }
    let f_ext = assemble_external_force(mesh, None);
    let constraints = dirichlet_constraints(mesh, 2)?;

    let mut u = u0.to_vec();
    let mut history: Vec<f64> = Vec::new();
    let mut iterations = 0usize;
    let mut converged = true;

    'steps: for step in 1..=opts.load_steps {
        let scale = step as f64 / opts.load_steps as f64;
        let scaled: Vec<(usize, f64)> = constraints.iter().map(|&(d, g)| (d, scale * g)).collect();
        let f_target: Vec<f64> = f_ext.iter().map(|v| scale * v).collect();
        // enforce prescribed values at this load level
        for &(d, g) in &scaled {
            u[d] = g;
        }
        let mut grow_streak = 0usize;
        let mut prev_norm = f64::INFINITY;
        loop {
            let f_int = match internal_force_neohookean(mesh, material, &u) {
                Ok(f) => f,
                Err(Error::ElementInversion { .. }) => {
                    converged = false;
                    break 'steps;
                }
                Err(e) => return Err(e),
            };
            let r_full: Vec<f64> = f_int.iter().zip(&f_target).map(|(a, b)| a - b).collect();
            let free_r: Vec<f64> = {
                // restrict to free dofs without assembling the tangent yet
                let mut mask = vec![true; n_dofs];
                for &(d, _) in &scaled {
                    mask[d] = false;
                }
                r_full.iter().zip(&mask).filter(|(_, m)| **m).map(|(v, _)| *v).collect()
            };
            let norm = math::norm2(&free_r);
            history.push(norm);
            if norm <= opts.tol {
                break;
            }
            if iterations >= opts.max_iter {
                converged = false;
                break 'steps;
            }
            if norm > prev_norm {
                grow_streak += 1;
                if grow_streak >= 5 {
                    converged = false;
                    break 'steps;
                }
            } else {
                grow_streak = 0;
            }
            prev_norm = norm;

            let kt = match tangent_neohookean(mesh, material, &u) {
                Ok(k) => k,
                Err(Error::ElementInversion { .. }) => {
                    converged = false;
                    break 'steps;
                }
                Err(e) => return Err(e),
            };
            let sys = apply_dirichlet(&kt, &r_full, &scaled)?;
            // solve K du = r on free dofs, then u <- u - du
            let rhs = sys.restrict(&r_full);
            let du = if sys.n_free() <= opts.dense_limit {
                match dense_direct_solve(&sys.reduced_k, &rhs) {
                    Ok(d) => d,
                    Err(Error::SingularMatrix) => {
                        converged = false;
                        break 'steps;
                    }
                    Err(e) => return Err(e),
                }
            } else {
                let zero = vec![0.0; sys.n_free()];
                let (d, rep) =
                    cg_solve(&sys.reduced_k, &rhs, &zero, 1e-12, 10 * sys.n_free(), GuessLabel::Zero);
                if !rep.converged {
                    converged = false;
                    break 'steps;
                }
                d
            };
            for (k, &dof) in sys.free_dofs().iter().enumerate() {
                u[dof] -= du[k];
            }
            iterations += 1;
        }
    }
    if history.is_empty() {
        history.push(0.0);
    }
    let report = SolveReport {
        iterations,
        residual_history: history,
        converged,
        tol: opts.tol,
        initial_guess_label: opts.guess_label,
    };
    Ok((u, report))
}

/// Residual r = f_int(u) - f_ext on free dofs (constrained entries zeroed)
/// and its norm. Linear materials assemble K u - F; the Neo-Hookean path uses
/// the total-Lagrangian internal force.
pub fn residual(mesh: &Mesh, material: &MaterialModel, u: &[f64]) -> Result<(Vec<f64>, f64)> {
    let r_full = match material {
        MaterialModel::PlaneStress(_) | MaterialModel::PlaneStrain(_) => {
            let (k, f) = super::assemble::assemble_linear_elasticity(mesh, material, None)?;
            let ku = k.matvec_alloc(u);
            ku.iter().zip(&f).map(|(a, b)| a - b).collect::<Vec<f64>>()
        }
        MaterialModel::NeoHookean(_) => {
            let f_ext = assemble_external_force(mesh, None);
            let f_int = internal_force_neohookean(mesh, material, u)?;
            f_int.iter().zip(&f_ext).map(|(a, b)| a - b).collect::<Vec<f64>>()
        }
        MaterialModel::Poisson { k } => {
            let (kk, f) = super::assemble::assemble_poisson(mesh, k, &|_| 0.0)?;
            let ku = kk.matvec_alloc(u);
            ku.iter().zip(&f).map(|(a, b)| a - b).collect::<Vec<f64>>()
        }
    };
    let dofs = material.dofs_per_node();
    let constraints = dirichlet_constraints(mesh, dofs)?;
    let mut r = r_full;
    for &(d, _) in &constraints {
        r[d] = 0.0;
    }
    let norm = math::norm2(&r);
    Ok((r, norm))
}
