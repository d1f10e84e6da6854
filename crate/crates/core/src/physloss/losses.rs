//! Variational energy losses. Each loss value is computed by element
//! quadrature (independent of the assembled system) while its nodal gradient
//! is the corresponding FEM residual — the identity that makes pretraining
//! and warm-starting two views of the same discrete problem.

use super::BcAnsatz;
use crate::error::Result;
use crate::fem::{
    assemble_external_force, assemble_linear_elasticity, assemble_poisson, elastic_d_matrix,
    internal_force_neohookean, strain_energy_neohookean, MaterialField, MaterialModel,
    SparseMatrixCsr,
};
use crate::math;
use crate::mesh::{gauss_rule, Mesh};
use crate::operator::OperatorRun;
use crate::tensor::ParamStore;
use alloc::vec::Vec;

/// A loss value with its analytic per-dof gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct LossBundle {
    pub loss: f64,
    pub grad_u: Vec<f64>,
}

/// Linear elastic energy loss: L(u) = int(psi) - u.F, with gradient K u - F.
/// The energy integral is evaluated by quadrature of 1/2 sigma:eps, an
/// independent route from the assembled K used for the gradient.
pub struct LinearEnergy {
    mesh: Mesh,
    material: MaterialModel,
    k: SparseMatrixCsr,
    f: Vec<f64>,
}

impl LinearEnergy {
    pub fn new(mesh: Mesh, material: MaterialModel) -> Result<Self> {
        let (k, f) = assemble_linear_elasticity(&mesh, &material, None)?;
        Ok(LinearEnergy { mesh, material, k, f })
    }

    pub fn stiffness(&self) -> &SparseMatrixCsr {
        &self.k
    }

    pub fn load(&self) -> &[f64] {
        &self.f
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    /// Strain energy by quadrature: sum over elements of w detJ psi(eps(u)).
    pub fn strain_energy(&self, u: &[f64]) -> Result<f64> {
        let rule = gauss_rule(self.mesh.element_type);
        let en = self.mesh.element_type.node_count();
        let params = self.material.elastic_params().expect("linear material");
        let mut energy = 0.0;
        for e in 0..self.mesh.n_elements() {
            let conn = &self.mesh.elements[e];
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                let (det, grads) = self.mesh.physical_gradients(e, *p)?;
                let (ev, nv) = params.at(&self.mesh, e, *p)?;
                let d = elastic_d_matrix(&self.material, ev, nv);
                // eps = (e11, e22, 2 e12)
                let mut eps = [0.0; 3];
                for i in 0..en {
                    let (ux, uy) = (u[2 * conn[i]], u[2 * conn[i] + 1]);
                    eps[0] += grads[i][0] * ux;
                    eps[1] += grads[i][1] * uy;
                    eps[2] += grads[i][1] * ux + grads[i][0] * uy;
                }
                let mut psi = 0.0;
                for r in 0..3 {
                    for s in 0..3 {
                        psi += 0.5 * eps[r] * d[r][s] * eps[s];
                    }
                }
                energy += w * det * psi;
            }
        }
        Ok(energy)
    }

    pub fn loss(&self, u: &[f64]) -> Result<LossBundle> {
        let energy = self.strain_energy(u)?;
        let work = math::dot(u, &self.f);
        let mut grad = self.k.matvec_alloc(u);
        for (g, fv) in grad.iter_mut().zip(&self.f) {
            *g -= fv;
        }
        Ok(LossBundle { loss: energy - work, grad_u: grad })
    }
}

/// Neo-Hookean energy loss: L(u) = int(psi(F(u))) - u.f_ext, gradient
/// f_int(u) - f_ext. Element inversion propagates as an error so callers can
/// skip the sample.
pub struct NeoHookeanEnergy {
    mesh: Mesh,
    material: MaterialModel,
    f_ext: Vec<f64>,
}

impl NeoHookeanEnergy {
    pub fn new(mesh: Mesh, material: MaterialModel) -> Self {
        let f_ext = assemble_external_force(&mesh, None);
        NeoHookeanEnergy { mesh, material, f_ext }
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn external_force(&self) -> &[f64] {
        &self.f_ext
    }

    pub fn loss(&self, u: &[f64]) -> Result<LossBundle> {
        let energy = strain_energy_neohookean(&self.mesh, &self.material, u)?;
        let work = math::dot(u, &self.f_ext);
        let f_int = internal_force_neohookean(&self.mesh, &self.material, u)?;
        let grad: Vec<f64> = f_int.iter().zip(&self.f_ext).map(|(a, b)| a - b).collect();
        Ok(LossBundle { loss: energy - work, grad_u: grad })
    }
}

/// Variational Poisson loss: L(T) = int(1/2 k grad T . grad T - f T) - int(q T),
/// gradient K T - F.
pub struct PoissonVariational {
    mesh: Mesh,
    conductivity: MaterialField,
    k: SparseMatrixCsr,
    f: Vec<f64>,
}

impl PoissonVariational {
    pub fn new(
        mesh: Mesh,
        conductivity: MaterialField,
        source: &dyn Fn([f64; 2]) -> f64,
    ) -> Result<Self> {
        let (k, f) = assemble_poisson(&mesh, &conductivity, source)?;
        Ok(PoissonVariational { mesh, conductivity, k, f })
    }

    pub fn stiffness(&self) -> &SparseMatrixCsr {
        &self.k
    }

    pub fn load(&self) -> &[f64] {
        &self.f
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    /// Dirichlet-energy half by quadrature (independent of the assembled K).
    fn gradient_energy(&self, t: &[f64]) -> Result<f64> {
        let rule = gauss_rule(self.mesh.element_type);
        let en = self.mesh.element_type.node_count();
        let mut energy = 0.0;
        for e in 0..self.mesh.n_elements() {
            let conn = &self.mesh.elements[e];
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                let (det, grads) = self.mesh.physical_gradients(e, *p)?;
                let kq = self.conductivity.at(&self.mesh, e, *p);
                let mut g = [0.0; 2];
                for i in 0..en {
                    g[0] += grads[i][0] * t[conn[i]];
                    g[1] += grads[i][1] * t[conn[i]];
                }
                energy += 0.5 * w * det * kq * (g[0] * g[0] + g[1] * g[1]);
            }
        }
        Ok(energy)
    }

    pub fn loss(&self, t: &[f64]) -> Result<LossBundle> {
        let dirichlet_energy = self.gradient_energy(t)?;
        // the assembled F carries both the source work and the boundary flux
        // work, so the functional is int(1/2 k |grad T|^2) - T.F
        let work = math::dot(t, &self.f);
        let mut grad = self.k.matvec_alloc(t);
        for (g, fv) in grad.iter_mut().zip(&self.f) {
            *g -= fv;
        }
        Ok(LossBundle { loss: dirichlet_energy - work, grad_u: grad })
    }
}

/// Chain an analytic nodal-gradient bundle through the ansatz into the
/// operator tape: dL/dtheta = (dL/dU . dU/draw) . draw/dtheta. No second
/// computational graph is built for the spatial derivatives.
pub fn backprop_through_loss(
    run: &OperatorRun,
    ansatz: &BcAnsatz,
    bundle: &LossBundle,
    store: &ParamStore,
) -> Result<Vec<f64>> {
    let width = run.output().cols();
    let seed = ansatz.chain(&bundle.grad_u, width)?;
    run.backward_params(&seed, store)
}
