//! Global assembly of the linear elastic and Poisson systems, plus the
//! external (traction + body) force vector shared by all formulations.

use super::material::{elastic_d_matrix, MaterialField, MaterialModel};
use super::SparseMatrixCsr;
use crate::error::{Error, Result};
use crate::math;
use crate::mesh::{edge_rule, edge_shape_values, gauss_rule, Mesh};
use alloc::vec;
use alloc::vec::Vec;

/// Stiffness and load vector for a linear elastic material (2 dofs/node).
/// `body` is an optional body-force density f(x).
pub fn assemble_linear_elasticity(
    mesh: &Mesh,
    material: &MaterialModel,
    body: Option<&dyn Fn([f64; 2]) -> [f64; 2]>,
) -> Result<(SparseMatrixCsr, Vec<f64>)> {
    let params = match material {
        MaterialModel::PlaneStress(p) | MaterialModel::PlaneStrain(p) => p,
        _ => return Err(Error::Invalid("assemble_linear_elasticity needs a linear elastic material".into())),
    };
    params.e.validate_len(mesh)?;
    params.nu.validate_len(mesh)?;
    let n_dofs = 2 * mesh.n_nodes();
    let rule = gauss_rule(mesh.element_type);
    let en = mesh.element_type.node_count();
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    for e in 0..mesh.n_elements() {
        let conn = &mesh.elements[e];
        let mut ke = vec![0.0; (2 * en) * (2 * en)];
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let (det, grads) = mesh.physical_gradients(e, *p)?;
            let (ev, nv) = params.at(mesh, e, *p)?;
            let d = elastic_d_matrix(material, ev, nv);
            // B is 3 x 2en; accumulate B^T D B directly
            let scale = w * det;
            for i in 0..en {
                let bi = [[grads[i][0], 0.0], [0.0, grads[i][1]], [grads[i][1], grads[i][0]]];
                for j in 0..en {
                    let bj = [[grads[j][0], 0.0], [0.0, grads[j][1]], [grads[j][1], grads[j][0]]];
                    for a in 0..2 {
                        for b in 0..2 {
                            let mut acc = 0.0;
                            for r in 0..3 {
                                for s in 0..3 {
                                    acc += bi[r][a] * d[r][s] * bj[s][b];
                                }
                            }
                            ke[(2 * i + a) * 2 * en + (2 * j + b)] += scale * acc;
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
    let k = SparseMatrixCsr::from_triplets(n_dofs, &triplets)?;
    let f = assemble_external_force(mesh, body);
    Ok((k, f))
}

/// External nodal force: edge tractions plus optional body force (2 dofs/node).
pub fn assemble_external_force(
    mesh: &Mesh,
    body: Option<&dyn Fn([f64; 2]) -> [f64; 2]>,
) -> Vec<f64> {
    let mut f = vec![0.0; 2 * mesh.n_nodes()];
    let (pts, wts) = edge_rule(mesh.element_type);
    for bc in &mesh.neumann {
        let nodes = &bc.edge;
        for (t, w) in pts.iter().zip(&wts) {
            let (nv, dv, count) = edge_shape_values(mesh.element_type, *t);
            let mut tangent = [0.0; 2];
            for i in 0..count {
                tangent[0] += dv[i] * mesh.nodes[nodes[i]][0];
                tangent[1] += dv[i] * mesh.nodes[nodes[i]][1];
            }
            let jac = math::hypot(tangent[0], tangent[1]);
            for i in 0..count {
                f[2 * nodes[i]] += w * jac * nv[i] * bc.tx;
                f[2 * nodes[i] + 1] += w * jac * nv[i] * bc.ty;
            }
        }
    }
    if let Some(bf) = body {
        let rule = gauss_rule(mesh.element_type);
        let en = mesh.element_type.node_count();
        for e in 0..mesh.n_elements() {
            let conn = &mesh.elements[e];
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                let (_, det) = mesh.jacobian(e, *p);
                let x = mesh.position(e, *p);
                let fx = bf(x);
                let (nv, _) = crate::mesh::shape_values(mesh.element_type, *p);
                for i in 0..en {
                    f[2 * conn[i]] += w * det * nv[i] * fx[0];
                    f[2 * conn[i] + 1] += w * det * nv[i] * fx[1];
                }
            }
        }
    }
    f
}

/// Stiffness and load vector for scalar diffusion (1 dof/node). Neumann
/// `tx` carries the boundary flux; `source` is f(x).
pub fn assemble_poisson(
    mesh: &Mesh,
    conductivity: &MaterialField,
    source: &dyn Fn([f64; 2]) -> f64,
) -> Result<(SparseMatrixCsr, Vec<f64>)> {
    conductivity.validate_len(mesh)?;
    let n = mesh.n_nodes();
    let rule = gauss_rule(mesh.element_type);
    let en = mesh.element_type.node_count();
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    let mut f = vec![0.0; n];
    for e in 0..mesh.n_elements() {
        let conn = &mesh.elements[e];
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let (det, grads) = mesh.physical_gradients(e, *p)?;
            let k = conductivity.at(mesh, e, *p);
            if k <= 0.0 {
                return Err(Error::InvalidMaterial {
                    element: e,
                    detail: alloc::format!("k = {k}"),
                });
            }
            let (nv, _) = crate::mesh::shape_values(mesh.element_type, *p);
            let x = mesh.position(e, *p);
            let fx = source(x);
            let scale = w * det;
            for i in 0..en {
                for j in 0..en {
                    triplets.push((
                        conn[i],
                        conn[j],
                        scale * k * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1]),
                    ));
                }
                f[conn[i]] += scale * nv[i] * fx;
            }
        }
    }
    // boundary flux
    let (pts, wts) = edge_rule(mesh.element_type);
    for bc in &mesh.neumann {
        let nodes = &bc.edge;
        for (t, w) in pts.iter().zip(&wts) {
            let (nv, dv, count) = edge_shape_values(mesh.element_type, *t);
            let mut tangent = [0.0; 2];
            for i in 0..count {
                tangent[0] += dv[i] * mesh.nodes[nodes[i]][0];
                tangent[1] += dv[i] * mesh.nodes[nodes[i]][1];
            }
            let jac = math::hypot(tangent[0], tangent[1]);
            for i in 0..count {
                f[nodes[i]] += w * jac * nv[i] * bc.tx;
            }
        }
    }
    let k = SparseMatrixCsr::from_triplets(n, &triplets)?;
    Ok((k, f))
}
