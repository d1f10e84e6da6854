//! Finite element assembly and solution: CSR systems, Dirichlet elimination,
//! conjugate gradients, dense direct oracle, and the total-Lagrangian
//! Neo-Hookean path with Newton-Raphson.

mod assemble;
mod cg;
mod csr;
mod dense;
mod dirichlet;
mod material;
mod neohookean;
mod newton;

pub use assemble::{assemble_external_force, assemble_linear_elasticity, assemble_poisson};
pub use cg::{cg_solve, GuessLabel, SolveReport};
pub use csr::SparseMatrixCsr;
pub use dense::{dense_direct_solve, is_spd, lu_solve, spectral_radius};
pub use dirichlet::{apply_dirichlet, dirichlet_constraints, DirichletSystem};
pub use material::{elastic_d_matrix, lame, ElasticParams, MaterialField, MaterialModel};
pub use neohookean::{
    energy_density, geometric_stiffness_neohookean, internal_force_neohookean, kinematic_state,
    strain_energy_neohookean, tangent_neohookean, KinematicState,
};
pub use newton::{newton_solve, residual, NewtonOptions};
