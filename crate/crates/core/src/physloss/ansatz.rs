//! Hard boundary-condition ansatz: the raw network output is multiplied by a
//! distance-like factor d(x)/L that vanishes exactly on the Dirichlet
//! boundary, so essential conditions hold for any network weights. The same
//! scalar factor multiplies every displacement component.

use crate::error::{Error, Result};
use crate::math;
use crate::mesh::Mesh;
use crate::tensor::Tensor;
use alloc::format;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BcAnsatz {
    /// Per-node multiplier for the x component (or the scalar field).
    pub mult_x: Vec<f64>,
    /// Per-node multiplier for the y component.
    pub mult_y: Vec<f64>,
    /// Characteristic length used to normalize the distance.
    pub length: f64,
}

fn dist_to_segment(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    if len2 == 0.0 {
        return math::hypot(ap[0], ap[1]);
    }
    let t = (ap[0] * ab[0] + ap[1] * ab[1]) / len2;
    if t <= 0.0 {
        math::hypot(ap[0], ap[1])
    } else if t >= 1.0 {
        math::hypot(p[0] - b[0], p[1] - b[1])
    } else {
        // perpendicular distance via the cross product: exactly zero for
        // points on the segment line, unlike reconstructing the projection
        (ab[0] * ap[1] - ab[1] * ap[0]).abs() / math::sqrt(len2)
    }
}

impl BcAnsatz {
    /// No constraints: multiplier identically 1.
    pub fn unconstrained(n_nodes: usize) -> Self {
        BcAnsatz {
            mult_x: alloc::vec![1.0; n_nodes],
            mult_y: alloc::vec![1.0; n_nodes],
            length: 1.0,
        }
    }

    /// Clamp along the segment [a, b]: multiplier is the point-to-segment
    /// distance over `length`, applied to both components.
    pub fn segment_clamp(nodes: &[[f64; 2]], a: [f64; 2], b: [f64; 2], length: f64) -> Self {
        let m: Vec<f64> = nodes.iter().map(|p| dist_to_segment(*p, a, b) / length).collect();
        BcAnsatz { mult_x: m.clone(), mult_y: m, length }
    }

    /// Fold a constant output scale into the multiplier (the network then
    /// works in O(1) outputs regardless of the physical displacement scale).
    pub fn scaled(mut self, scale: f64) -> Self {
        for v in self.mult_x.iter_mut().chain(self.mult_y.iter_mut()) {
            *v *= scale;
        }
        self
    }

    /// Scalar field clamped on the whole rectangle boundary: multiplier is
    /// the distance to the nearest box edge over `length`.
    pub fn box_clamp(nodes: &[[f64; 2]], x0: f64, x1: f64, y0: f64, y1: f64, length: f64) -> Self {
        let m: Vec<f64> = nodes
            .iter()
            .map(|p| {
                let d = (p[0] - x0).min(x1 - p[0]).min(p[1] - y0).min(y1 - p[1]);
                d.max(0.0) / length
            })
            .collect();
        BcAnsatz { mult_x: m.clone(), mult_y: m, length }
    }

    pub fn n_nodes(&self) -> usize {
        self.mult_x.len()
    }

    /// U = multiplier (.) raw, flattening N x 2 raw output to the 2N nodal
    /// vector (or N x 1 to N for scalar fields).
    pub fn apply(&self, raw: &Tensor) -> Result<Vec<f64>> {
        let n = self.n_nodes();
        if raw.rows() != n {
            return Err(Error::ShapeMismatch {
                op: "apply_ansatz",
                detail: format!("raw {:?} vs {n} nodes", raw.shape()),
            });
        }
        match raw.cols() {
            1 => Ok((0..n).map(|i| self.mult_x[i] * raw.at(i, 0)).collect()),
            2 => {
                let mut u = Vec::with_capacity(2 * n);
                for i in 0..n {
                    u.push(self.mult_x[i] * raw.at(i, 0));
                    u.push(self.mult_y[i] * raw.at(i, 1));
                }
                Ok(u)
            }
            w => Err(Error::ShapeMismatch {
                op: "apply_ansatz",
                detail: format!("unsupported output width {w}"),
            }),
        }
    }

    /// Chain rule: dL/d(raw) = multiplier (.) dL/dU, as an N x width tensor.
    pub fn chain(&self, grad_u: &[f64], width: usize) -> Result<Tensor> {
        let n = self.n_nodes();
        if grad_u.len() != n * width {
            return Err(Error::ShapeMismatch {
                op: "ansatz_chain",
                detail: format!("grad length {} vs {n} x {width}", grad_u.len()),
            });
        }
        let mut g = Tensor::zeros(&[n, width]);
        for i in 0..n {
            g.set(i, 0, self.mult_x[i] * grad_u[width * i]);
            if width == 2 {
                g.set(i, 1, self.mult_y[i] * grad_u[2 * i + 1]);
            }
        }
        Ok(g)
    }

    /// Check the multiplier against the mesh's Dirichlet list: it must vanish
    /// exactly on constrained components (which must be homogeneous) and be
    /// positive elsewhere. `width` is 1 for scalar fields, 2 for displacement.
    pub fn validate_against(&self, mesh: &Mesh, width: usize) -> Result<()> {
        if self.n_nodes() != mesh.n_nodes() {
            return Err(Error::Invalid(format!(
                "ansatz covers {} nodes, mesh has {}",
                self.n_nodes(),
                mesh.n_nodes()
            )));
        }
        let mut constrained = alloc::vec![[false; 2]; mesh.n_nodes()];
        for bc in &mesh.dirichlet {
            if let Some(v) = bc.ux {
                if v != 0.0 {
                    return Err(Error::Invalid(format!(
                        "hard-BC ansatz requires homogeneous constraints; node {} has ux = {v}",
                        bc.node
                    )));
                }
                constrained[bc.node][0] = true;
            }
            if let Some(v) = bc.uy {
                if v != 0.0 {
                    return Err(Error::Invalid(format!(
                        "hard-BC ansatz requires homogeneous constraints; node {} has uy = {v}",
                        bc.node
                    )));
                }
                constrained[bc.node][1] = true;
            }
        }
        for i in 0..mesh.n_nodes() {
            for (c, mult) in [(0, self.mult_x[i]), (1, self.mult_y[i])].into_iter().take(width) {
                if constrained[i][c] && mult != 0.0 {
                    return Err(Error::Invalid(format!(
                        "multiplier must vanish on constrained node {i} component {c}, got {mult}"
                    )));
                }
                if !constrained[i][c] && mult <= 0.0 {
                    return Err(Error::Invalid(format!(
                        "multiplier must be positive on free node {i} component {c}, got {mult}"
                    )));
                }
            }
        }
        Ok(())
    }
}
