//! Total-Lagrangian Neo-Hookean kinematics, internal force, strain energy,
//! and consistent tangent (material + geometric parts).
//!
//! Energy density: psi = lambda/2 (ln J)^2 - mu ln J + mu/2 (I1 - 2), with
//! J = det F, C = F^T F, I1 = tr C. Second Piola-Kirchhoff stress:
//! S = mu (I - C^-1) + lambda ln J C^-1.

use super::material::{lame, MaterialModel};
use super::SparseMatrixCsr;
use crate::error::{Error, Result};
use crate::math;
use crate::mesh::{gauss_rule, Mesh};
use alloc::vec;
use alloc::vec::Vec;

type Mat2 = [[f64; 2]; 2];

/// Deformation state at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinematicState {
    pub f: Mat2,
    pub c: Mat2,
    pub j: f64,
    pub i1: f64,
    pub s: Mat2,
}

/// Kinematics and stress from a deformation gradient; `None` if inverted.
pub fn kinematic_state(f: Mat2, lambda: f64, mu: f64) -> Option<KinematicState> {
    let j = f[0][0] * f[1][1] - f[0][1] * f[1][0];
    if j <= 0.0 {
        return None;
    }
    let c = [
        [f[0][0] * f[0][0] + f[1][0] * f[1][0], f[0][0] * f[0][1] + f[1][0] * f[1][1]],
        [f[0][1] * f[0][0] + f[1][1] * f[1][0], f[0][1] * f[0][1] + f[1][1] * f[1][1]],
    ];
    let i1 = c[0][0] + c[1][1];
    let det_c = j * j;
    let cinv = [[c[1][1] / det_c, -c[0][1] / det_c], [-c[1][0] / det_c, c[0][0] / det_c]];
    let ln_j = math::ln(j);
    let mut s = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            let id = if a == b { 1.0 } else { 0.0 };
            s[a][b] = mu * (id - cinv[a][b]) + lambda * ln_j * cinv[a][b];
        }
    }
    Some(KinematicState { f, c, j, i1, s })
}

pub fn energy_density(state: &KinematicState, lambda: f64, mu: f64) -> f64 {
    let ln_j = math::ln(state.j);
    0.5 * lambda * ln_j * ln_j - mu * ln_j + 0.5 * mu * (state.i1 - 2.0)
}

fn neo_params(material: &MaterialModel) -> Result<&super::material::ElasticParams> {
    match material {
        MaterialModel::NeoHookean(p) => Ok(p),
        _ => Err(Error::Invalid("expected a Neo-Hookean material".into())),
    }
}

/// Deformation gradient F = I + sum_I u_I (x) dN_I/dX at a quadrature point.
fn deformation_gradient(grads: &[[f64; 2]], conn: &[usize], u: &[f64]) -> Mat2 {
    let mut f = [[1.0, 0.0], [0.0, 1.0]];
    for (i, g) in grads.iter().enumerate() {
        let (ux, uy) = (u[2 * conn[i]], u[2 * conn[i] + 1]);
        f[0][0] += ux * g[0];
        f[0][1] += ux * g[1];
        f[1][0] += uy * g[0];
        f[1][1] += uy * g[1];
    }
    f
}

/// Internal nodal force f_int(u) over all dofs.
pub fn internal_force_neohookean(mesh: &Mesh, material: &MaterialModel, u: &[f64]) -> Result<Vec<f64>> {
    let params = neo_params(material)?;
    let rule = gauss_rule(mesh.element_type);
    let en = mesh.element_type.node_count();
    let mut f_int = vec![0.0; 2 * mesh.n_nodes()];
    for e in 0..mesh.n_elements() {
        let conn = &mesh.elements[e];
        for (q, (p, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
            let (det, grads) = mesh.physical_gradients(e, *p)?;
            let (ev, nv) = params.at(mesh, e, *p)?;
            let (lambda, mu) = lame(ev, nv);
            let fdef = deformation_gradient(&grads, conn, u);
            let state = kinematic_state(fdef, lambda, mu).ok_or(Error::ElementInversion {
                element: e,
                point: q,
                det: fdef[0][0] * fdef[1][1] - fdef[0][1] * fdef[1][0],
            })?;
            // first Piola-Kirchhoff P = F S
            let mut pk = [[0.0; 2]; 2];
            for a in 0..2 {
                for b in 0..2 {
                    pk[a][b] = state.f[a][0] * state.s[0][b] + state.f[a][1] * state.s[1][b];
                }
            }
            let scale = w * det;
            for i in 0..en {
                for a in 0..2 {
                    f_int[2 * conn[i] + a] +=
                        scale * (pk[a][0] * grads[i][0] + pk[a][1] * grads[i][1]);
                }
            }
        }
    }
    Ok(f_int)
}

/// Total strain energy of a displacement state.
pub fn strain_energy_neohookean(mesh: &Mesh, material: &MaterialModel, u: &[f64]) -> Result<f64> {
    let params = neo_params(material)?;
    let rule = gauss_rule(mesh.element_type);
    let mut energy = 0.0;
    for e in 0..mesh.n_elements() {
        let conn = &mesh.elements[e];
        for (q, (p, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
            let (det, grads) = mesh.physical_gradients(e, *p)?;
            let (ev, nv) = params.at(mesh, e, *p)?;
            let (lambda, mu) = lame(ev, nv);
            let fdef = deformation_gradient(&grads, conn, u);
            let state = kinematic_state(fdef, lambda, mu).ok_or(Error::ElementInversion {
                element: e,
                point: q,
                det: fdef[0][0] * fdef[1][1] - fdef[0][1] * fdef[1][0],
            })?;
            energy += w * det * energy_density(&state, lambda, mu);
        }
    }
    Ok(energy)
}

/// Consistent tangent K = K_mat + K_geo at displacement u.
pub fn tangent_neohookean(
    mesh: &Mesh,
    material: &MaterialModel,
    u: &[f64],
) -> Result<SparseMatrixCsr> {
    let params = neo_params(material)?;
    let rule = gauss_rule(mesh.element_type);
    let en = mesh.element_type.node_count();
    let n_dofs = 2 * mesh.n_nodes();
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    for e in 0..mesh.n_elements() {
        let conn = &mesh.elements[e];
        let mut ke = vec![0.0; (2 * en) * (2 * en)];
        for (q, (p, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
            let (det, grads) = mesh.physical_gradients(e, *p)?;
            let (ev, nv) = params.at(mesh, e, *p)?;
            let (lambda, mu) = lame(ev, nv);
            let fdef = deformation_gradient(&grads, conn, u);
            let state = kinematic_state(fdef, lambda, mu).ok_or(Error::ElementInversion {
                element: e,
                point: q,
                det: fdef[0][0] * fdef[1][1] - fdef[0][1] * fdef[1][0],
            })?;
            let ln_j = math::ln(state.j);
            let det_c = state.j * state.j;
            let ci = [
                [state.c[1][1] / det_c, -state.c[0][1] / det_c],
                [-state.c[1][0] / det_c, state.c[0][0] / det_c],
            ];
            // material tangent C^SE in Voigt (11, 22, 12), engineering shear
            let g = mu - lambda * ln_j;
            let d = [
                [
                    lambda * ci[0][0] * ci[0][0] + 2.0 * g * ci[0][0] * ci[0][0],
                    lambda * ci[0][0] * ci[1][1] + 2.0 * g * ci[0][1] * ci[0][1],
                    lambda * ci[0][0] * ci[0][1] + 2.0 * g * ci[0][0] * ci[0][1],
                ],
                [
                    lambda * ci[0][0] * ci[1][1] + 2.0 * g * ci[0][1] * ci[0][1],
                    lambda * ci[1][1] * ci[1][1] + 2.0 * g * ci[1][1] * ci[1][1],
                    lambda * ci[1][1] * ci[0][1] + 2.0 * g * ci[1][1] * ci[0][1],
                ],
                [
                    lambda * ci[0][0] * ci[0][1] + 2.0 * g * ci[0][0] * ci[0][1],
                    lambda * ci[1][1] * ci[0][1] + 2.0 * g * ci[1][1] * ci[0][1],
                    lambda * ci[0][1] * ci[0][1] + g * (ci[0][0] * ci[1][1] + ci[0][1] * ci[0][1]),
                ],
            ];
            let scale = w * det;
            // B0 rows per node: variation of E in Voigt form
            let bmat = |i: usize| -> [[f64; 2]; 3] {
                let gn = grads[i];
                [
                    [state.f[0][0] * gn[0], state.f[1][0] * gn[0]],
                    [state.f[0][1] * gn[1], state.f[1][1] * gn[1]],
                    [
                        state.f[0][0] * gn[1] + state.f[0][1] * gn[0],
                        state.f[1][0] * gn[1] + state.f[1][1] * gn[0],
                    ],
                ]
            };
            for i in 0..en {
                let bi = bmat(i);
                for j in 0..en {
                    let bj = bmat(j);
                    // geometric part: (dN_I . S dN_J) delta_ab
                    let mut geo = 0.0;
                    for k in 0..2 {
                        for l in 0..2 {
                            geo += grads[i][k] * state.s[k][l] * grads[j][l];
                        }
                    }
                    for a in 0..2 {
                        for b in 0..2 {
                            let mut mat = 0.0;
                            for r in 0..3 {
                                for s in 0..3 {
                                    mat += bi[r][a] * d[r][s] * bj[s][b];
                                }
                            }
                            let mut v = scale * mat;
                            if a == b {
                                v += scale * geo;
                            }
                            ke[(2 * i + a) * 2 * en + (2 * j + b)] += v;
                        }
                    }
                }
            }
        }
        for i in 0..en {
            for a in 0..2 {
                for j in 0..en {
                    for b in 0..2 {
                        triplets.push((
                            2 * conn[i] + a,
                            2 * conn[j] + b,
                            ke[(2 * i + a) * 2 * en + (2 * j + b)],
                        ));
                    }
                }
            }
        }
    }
    SparseMatrixCsr::from_triplets(n_dofs, &triplets)
}

/// Geometric stiffness alone (for the K_geo(0) = 0 check).
pub fn geometric_stiffness_neohookean(
    mesh: &Mesh,
    material: &MaterialModel,
    u: &[f64],
) -> Result<SparseMatrixCsr> {
    let params = neo_params(material)?;
    let rule = gauss_rule(mesh.element_type);
    let en = mesh.element_type.node_count();
    let n_dofs = 2 * mesh.n_nodes();
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    for e in 0..mesh.n_elements() {
        let conn = &mesh.elements[e];
        for (q, (p, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
            let (det, grads) = mesh.physical_gradients(e, *p)?;
            let (ev, nv) = params.at(mesh, e, *p)?;
            let (lambda, mu) = lame(ev, nv);
            let fdef = deformation_gradient(&grads, conn, u);
            let state = kinematic_state(fdef, lambda, mu).ok_or(Error::ElementInversion {
                element: e,
                point: q,
                det: fdef[0][0] * fdef[1][1] - fdef[0][1] * fdef[1][0],
            })?;
            let scale = w * det;
            for i in 0..en {
                for j in 0..en {
                    let mut geo = 0.0;
                    for k in 0..2 {
                        for l in 0..2 {
                            geo += grads[i][k] * state.s[k][l] * grads[j][l];
                        }
                    }
                    for a in 0..2 {
                        triplets.push((2 * conn[i] + a, 2 * conn[j] + a, scale * geo));
                    }
                }
            }
        }
    }
    SparseMatrixCsr::from_triplets(n_dofs, &triplets)
}
