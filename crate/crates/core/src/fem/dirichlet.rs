//! Dirichlet treatment by elimination, keeping the reduced system symmetric
//! positive definite for CG.

use super::SparseMatrixCsr;
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use alloc::vec;
use alloc::vec::Vec;

/// Reduced system plus the bookkeeping to move between full and free dof
/// vectors.
#[derive(Debug, Clone)]
pub struct DirichletSystem {
    pub reduced_k: SparseMatrixCsr,
    pub reduced_f: Vec<f64>,
    full_n: usize,
    free: Vec<usize>,
    prescribed: Vec<(usize, f64)>,
}

/// Eliminate constrained dofs: drops their rows/columns and lifts
/// inhomogeneous values into the right-hand side.
pub fn apply_dirichlet(
    k: &SparseMatrixCsr,
    f: &[f64],
    constraints: &[(usize, f64)],
) -> Result<DirichletSystem> {
    let n = k.n();
    let mut value: Vec<Option<f64>> = vec![None; n];
    for &(dof, g) in constraints {
        if dof >= n {
            return Err(Error::Invalid(alloc::format!("constraint dof {dof} out of range")));
        }
        match value[dof] {
            Some(existing) if existing != g => {
                return Err(Error::ConflictingConstraint { dof });
            }
            _ => value[dof] = Some(g),
        }
    }
    let mut free_map = vec![None; n];
    let mut free = Vec::new();
    for (dof, v) in value.iter().enumerate() {
        if v.is_none() {
            free_map[dof] = Some(free.len());
            free.push(dof);
        }
    }
    let mut reduced_f: Vec<f64> = free.iter().map(|&d| f[d]).collect();
    let mut triplets = Vec::new();
    for (ri, &i) in free.iter().enumerate() {
        let (cols, vals) = k.row(i);
        for (c, v) in cols.iter().zip(vals) {
            match free_map[*c] {
                Some(rj) => triplets.push((ri, rj, *v)),
                None => reduced_f[ri] -= v * value[*c].expect("constrained"),
            }
        }
    }
    let reduced_k = SparseMatrixCsr::from_triplets(free.len(), &triplets)?;
    let prescribed: Vec<(usize, f64)> =
        value.iter().enumerate().filter_map(|(d, v)| v.map(|g| (d, g))).collect();
    Ok(DirichletSystem { reduced_k, reduced_f, full_n: n, free, prescribed })
}

impl DirichletSystem {
    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    pub fn full_n(&self) -> usize {
        self.full_n
    }

    pub fn free_dofs(&self) -> &[usize] {
        &self.free
    }

    pub fn prescribed(&self) -> &[(usize, f64)] {
        &self.prescribed
    }

    /// Insert prescribed values back into a full-length vector.
    pub fn reconstruct(&self, u_reduced: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.full_n];
        for (ri, &d) in self.free.iter().enumerate() {
            full[d] = u_reduced[ri];
        }
        for &(d, g) in &self.prescribed {
            full[d] = g;
        }
        full
    }

    /// Extract the free components of a full-length vector.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&d| full[d]).collect()
    }

    /// Overwrite the constrained entries of a full vector with their
    /// prescribed values (scaled, for load stepping).
    pub fn enforce(&self, full: &mut [f64], scale: f64) {
        for &(d, g) in &self.prescribed {
            full[d] = scale * g;
        }
    }
}

/// Collect (dof, value) constraints from a mesh's Dirichlet list.
pub fn dirichlet_constraints(mesh: &Mesh, dofs_per_node: usize) -> Result<Vec<(usize, f64)>> {
    let mut out = Vec::new();
    for bc in &mesh.dirichlet {
        if dofs_per_node == 1 {
            if let Some(v) = bc.ux {
                out.push((bc.node, v));
            }
        } else {
            if let Some(v) = bc.ux {
                out.push((2 * bc.node, v));
            }
            if let Some(v) = bc.uy {
                out.push((2 * bc.node + 1, v));
            }
        }
    }
    Ok(out)
}
