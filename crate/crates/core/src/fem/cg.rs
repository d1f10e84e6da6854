//! Conjugate gradients with an arbitrary initial guess.

use super::SparseMatrixCsr;
use crate::math;
use alloc::vec;
use alloc::vec::Vec;

/// Where the initial iterate came from, for benchmark bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum GuessLabel {
    Zero,
    Operator,
    Exact,
    Custom,
}

/// Iteration record shared by the linear and Newton solvers.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SolveReport {
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub converged: bool,
    pub tol: f64,
    pub initial_guess_label: GuessLabel,
}

/// CG on an SPD system, stopping on relative residual ||K u - f|| / ||f|| < tol
/// (absolute when ||f|| = 0). The report records the residual of every
/// iterate, the initial one included.
pub fn cg_solve(
    k: &SparseMatrixCsr,
    f: &[f64],
    u0: &[f64],
    tol: f64,
    max_iter: usize,
    label: GuessLabel,
) -> (Vec<f64>, SolveReport) {
    let n = k.n();
    debug_assert_eq!(f.len(), n);
    debug_assert_eq!(u0.len(), n);
    let denom = {
        let nf = math::norm2(f);
        if nf > 0.0 {
            nf
        } else {
            1.0
        }
    };
    let mut u = u0.to_vec();
    let mut r = vec![0.0; n];
    k.matvec(&u, &mut r);
    for i in 0..n {
        r[i] = f[i] - r[i];
    }
    let mut rs = math::dot(&r, &r);
    let mut history = vec![math::sqrt(rs) / denom];
    if history[0] < tol {
        return (
            u,
            SolveReport {
                iterations: 0,
                residual_history: history,
                converged: true,
                tol,
                initial_guess_label: label,
            },
        );
    }
    let mut p = r.clone();
    let mut kp = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        k.matvec(&p, &mut kp);
        let alpha = rs / math::dot(&p, &kp);
        for i in 0..n {
            u[i] += alpha * p[i];
            r[i] -= alpha * kp[i];
        }
        let rs_new = math::dot(&r, &r);
        iterations += 1;
        let rel = math::sqrt(rs_new) / denom;
        history.push(rel);
        if rel < tol {
            converged = true;
            break;
        }
        let beta = rs_new / rs;
        rs = rs_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    (
        u,
        SolveReport {
            iterations,
            residual_history: history,
            converged,
            tol,
            initial_guess_label: label,
        },
    )
}
