//! 2D meshes: T3/Q4/Q8 elements, isoparametric shape functions, Gauss
//! quadrature, structured grid generation over bilinear corner maps, and the
//! Cook membrane geometry.

mod cook;
mod quadrature;
mod shape;
mod structured;
#[cfg(test)]
mod tests;

pub use cook::CookGeometry;
pub use quadrature::{edge_rule, gauss_rule, QuadratureRule};
pub use shape::{edge_shape_values, node_reference_coords, shape_gradients, shape_values, MAX_NODES};
pub use structured::{build_structured_mesh, CornerMap, Side, StructuredMesh};

use crate::error::{Error, Result};
use alloc::format;
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ElementType {
    T3,
    Q4,
    Q8,
}

impl ElementType {
    pub fn node_count(self) -> usize {
        match self {
            ElementType::T3 => 3,
            ElementType::Q4 => 4,
            ElementType::Q8 => 8,
        }
    }

    /// Node count per boundary edge (2 for linear, 3 for Q8).
    pub fn edge_node_count(self) -> usize {
        match self {
            ElementType::Q8 => 3,
            _ => 2,
        }
    }
}

/// Per-node Dirichlet constraint; `None` leaves the component free. For
/// scalar problems only `ux` is meaningful.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DirichletBc {
    pub node: usize,
    pub ux: Option<f64>,
    pub uy: Option<f64>,
}

/// Constant traction on a boundary edge, ordered `[end0, end1]` or
/// `[end0, end1, mid]` for Q8. For scalar problems `tx` carries the flux.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NeumannBc {
    pub edge: Vec<usize>,
    pub tx: f64,
    pub ty: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Mesh {
    pub element_type: ElementType,
    pub nodes: Vec<[f64; 2]>,
    pub elements: Vec<Vec<usize>>,
    pub dirichlet: Vec<DirichletBc>,
    pub neumann: Vec<NeumannBc>,
}

impl Mesh {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    /// Jacobian `J_ab = dx_a/dxi_b` and its determinant at a reference point.
    pub fn jacobian(&self, element: usize, xi: [f64; 2]) -> ([[f64; 2]; 2], f64) {
        let (grads, n) = shape_gradients(self.element_type, xi);
        let conn = &self.elements[element];
        let mut j = [[0.0; 2]; 2];
        for i in 0..n {
            let x = self.nodes[conn[i]];
            for a in 0..2 {
                for b in 0..2 {
                    j[a][b] += x[a] * grads[i][b];
                }
            }
        }
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        (j, det)
    }

    /// Physical shape-function gradients `dN_I/dX` and `det J` at a reference
    /// point. Fails on non-positive Jacobians.
    pub fn physical_gradients(&self, element: usize, xi: [f64; 2]) -> Result<(f64, Vec<[f64; 2]>)> {
        let (j, det) = self.jacobian(element, xi);
        if det <= 0.0 {
            return Err(Error::BadJacobian { element, det });
        }
        let inv = [[j[1][1] / det, -j[0][1] / det], [-j[1][0] / det, j[0][0] / det]];
        let (grads, n) = shape_gradients(self.element_type, xi);
        let mut out = Vec::with_capacity(n);
        for g in grads.iter().take(n) {
            // dN/dX_a = (J^-1)_{ba} dN/dxi_b
            out.push([inv[0][0] * g[0] + inv[1][0] * g[1], inv[0][1] * g[0] + inv[1][1] * g[1]]);
        }
        Ok((det, out))
    }

    /// Interpolate a nodal scalar field at a reference point of an element.
    pub fn interpolate(&self, element: usize, xi: [f64; 2], nodal: &[f64]) -> f64 {
        let (vals, n) = shape_values(self.element_type, xi);
        let conn = &self.elements[element];
        (0..n).map(|i| vals[i] * nodal[conn[i]]).sum()
    }

    /// Physical coordinates of a reference point of an element.
    pub fn position(&self, element: usize, xi: [f64; 2]) -> [f64; 2] {
        let (vals, n) = shape_values(self.element_type, xi);
        let conn = &self.elements[element];
        let mut x = [0.0; 2];
        for i in 0..n {
            x[0] += vals[i] * self.nodes[conn[i]][0];
            x[1] += vals[i] * self.nodes[conn[i]][1];
        }
        x
    }

    /// Total area by quadrature.
    pub fn area(&self) -> f64 {
        let rule = gauss_rule(self.element_type);
        let mut area = 0.0;
        for e in 0..self.n_elements() {
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                let (_, det) = self.jacobian(e, *p);
                area += w * det;
            }
        }
        area
    }

    /// Full consistency check: connectivity, node counts, Jacobians,
    /// boundary-condition sanity.
    pub fn validate(&self) -> Result<()> {
        let nn = self.n_nodes();
        let want = self.element_type.node_count();
        for (e, conn) in self.elements.iter().enumerate() {
            if conn.len() != want {
                return Err(Error::InvalidMesh(format!(
                    "element {e} has {} nodes, {:?} needs {want}",
                    conn.len(),
                    self.element_type
                )));
            }
            for &i in conn {
                if i >= nn {
                    return Err(Error::InvalidMesh(format!(
                        "element {e} references node {i} but mesh has {nn} nodes"
                    )));
                }
            }
        }
        let rule = gauss_rule(self.element_type);
        for e in 0..self.n_elements() {
            for p in &rule.points {
                let (_, det) = self.jacobian(e, *p);
                if det <= 0.0 {
                    return Err(Error::BadJacobian { element: e, det });
                }
            }
        }
        let edge_nodes = self.element_type.edge_node_count();
        let boundary = self.element_edges();
        for (k, bc) in self.neumann.iter().enumerate() {
            if bc.edge.len() != edge_nodes {
                return Err(Error::InvalidMesh(format!(
                    "neumann edge {k} has {} nodes, expected {edge_nodes}",
                    bc.edge.len()
                )));
            }
            for &i in &bc.edge {
                if i >= nn {
                    return Err(Error::InvalidMesh(format!("neumann edge {k} references node {i}")));
                }
            }
            let mut key = bc.edge.clone();
            key.sort_unstable();
            if !boundary.iter().any(|e| {
                let mut s = e.clone();
                s.sort_unstable();
                s == key
            }) {
                return Err(Error::InvalidMesh(format!(
                    "neumann edge {k} {:?} is not an element edge",
                    bc.edge
                )));
            }
        }
        for bc in &self.dirichlet {
            if bc.node >= nn {
                return Err(Error::InvalidMesh(format!("dirichlet node {} out of range", bc.node)));
            }
        }
        // A Dirichlet-constrained component must not also carry a traction on
        // an edge through the same node.
        for nbc in &self.neumann {
            for &i in &nbc.edge {
                if let Some(dbc) = self.dirichlet.iter().find(|d| d.node == i) {
                    if (dbc.ux.is_some() && nbc.tx != 0.0) || (dbc.uy.is_some() && nbc.ty != 0.0) {
                        return Err(Error::InvalidMesh(format!(
                            "node {i} is Dirichlet-constrained and carries a traction in the same component"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// All element edges (node lists in element-local order).
    pub fn element_edges(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        for conn in &self.elements {
            match self.element_type {
                ElementType::T3 => {
                    for (a, b) in [(0, 1), (1, 2), (2, 0)] {
                        out.push(alloc::vec![conn[a], conn[b]]);
                    }
                }
                ElementType::Q4 => {
                    for (a, b) in [(0, 1), (1, 2), (2, 3), (3, 0)] {
                        out.push(alloc::vec![conn[a], conn[b]]);
                    }
                }
                ElementType::Q8 => {
                    for (a, b, m) in [(0, 1, 4), (1, 2, 5), (2, 3, 6), (3, 0, 7)] {
                        out.push(alloc::vec![conn[a], conn[b], conn[m]]);
                    }
                }
            }
        }
        out
    }
}
