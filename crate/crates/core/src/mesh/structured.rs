//! Structured meshes over a bilinear image of the unit square.

use super::{gauss_rule, ElementType, Mesh};
use crate::error::{Error, Result};
use alloc::vec;
use alloc::vec::Vec;

/// Bilinear map from the parametric unit square. Corner order: (0,0), (1,0),
/// (1,1), (0,1).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CornerMap {
    pub corners: [[f64; 2]; 4],
}

impl CornerMap {
    pub fn unit_square() -> Self {
        CornerMap { corners: [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]] }
    }

    pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        CornerMap { corners: [[x0, y0], [x1, y0], [x1, y1], [x0, y1]] }
    }

    pub fn map(&self, s: f64, t: f64) -> [f64; 2] {
        let [c0, c1, c2, c3] = self.corners;
        let mut x = [0.0; 2];
        for a in 0..2 {
            x[a] = (1.0 - s) * (1.0 - t) * c0[a]
                + s * (1.0 - t) * c1[a]
                + s * t * c2[a]
                + (1.0 - s) * t * c3[a];
        }
        x
    }
}

/// Boundary side of the parametric square.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Left, Side::Right, Side::Bottom, Side::Top];

    pub fn index(self) -> usize {
        match self {
            Side::Left => 0,
            Side::Right => 1,
            Side::Bottom => 2,
            Side::Top => 3,
        }
    }
}

/// A structured mesh plus its boundary bookkeeping: per side, the ordered
/// node ids and the ordered element edges ([end0, end1(, mid)]) with the
/// parametric span each edge covers (for tagging sub-segments).
#[derive(Debug, Clone)]
pub struct StructuredMesh {
    pub mesh: Mesh,
    pub side_nodes: [Vec<usize>; 4],
    pub side_edges: [Vec<(Vec<usize>, [f64; 2])>; 4],
    /// Parametric coordinate of each side node along its side.
    pub side_node_params: [Vec<f64>; 4],
}

impl StructuredMesh {
    pub fn side_nodes(&self, side: Side) -> &[usize] {
        &self.side_nodes[side.index()]
    }

    pub fn side_edges(&self, side: Side) -> &[(Vec<usize>, [f64; 2])] {
        &self.side_edges[side.index()]
    }
}

/// Build an `nx x ny` structured mesh of the requested element type over the
/// corner map (T3 splits each cell into two triangles). Boundary conditions
/// are left empty; callers tag them via the side lists.
pub fn build_structured_mesh(
    nx: usize,
    ny: usize,
    et: ElementType,
    map: &CornerMap,
) -> Result<StructuredMesh> {
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidMesh("nx and ny must be at least 1".into()));
    }
    let sm = match et {
        ElementType::Q8 => build_q8(nx, ny, map),
        _ => build_linear(nx, ny, et, map),
    };
    // Reject degenerate corner maps up front, naming the element.
    let rule = gauss_rule(et);
    for e in 0..sm.mesh.n_elements() {
        for p in &rule.points {
            let (_, det) = sm.mesh.jacobian(e, *p);
            if det <= 0.0 {
                return Err(Error::BadJacobian { element: e, det });
            }
        }
    }
    Ok(sm)
}

fn build_linear(nx: usize, ny: usize, et: ElementType, map: &CornerMap) -> StructuredMesh {
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            nodes.push(map.map(i as f64 / nx as f64, j as f64 / ny as f64));
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut elements = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let (n00, n10, n11, n01) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            match et {
                ElementType::Q4 => elements.push(vec![n00, n10, n11, n01]),
                ElementType::T3 => {
                    elements.push(vec![n00, n10, n11]);
                    elements.push(vec![n00, n11, n01]);
                }
                ElementType::Q8 => unreachable!(),
            }
        }
    }
    let mut side_nodes: [Vec<usize>; 4] = Default::default();
    let mut side_node_params: [Vec<f64>; 4] = Default::default();
    for j in 0..=ny {
        side_nodes[0].push(id(0, j));
        side_node_params[0].push(j as f64 / ny as f64);
        side_nodes[1].push(id(nx, j));
        side_node_params[1].push(j as f64 / ny as f64);
    }
    for i in 0..=nx {
        side_nodes[2].push(id(i, 0));
        side_node_params[2].push(i as f64 / nx as f64);
        side_nodes[3].push(id(i, ny));
        side_node_params[3].push(i as f64 / nx as f64);
    }
    let mut side_edges: [Vec<(Vec<usize>, [f64; 2])>; 4] = Default::default();
    for j in 0..ny {
        let span = [j as f64 / ny as f64, (j + 1) as f64 / ny as f64];
        side_edges[0].push((vec![id(0, j), id(0, j + 1)], span));
        side_edges[1].push((vec![id(nx, j), id(nx, j + 1)], span));
    }
    for i in 0..nx {
        let span = [i as f64 / nx as f64, (i + 1) as f64 / nx as f64];
        side_edges[2].push((vec![id(i, 0), id(i + 1, 0)], span));
        side_edges[3].push((vec![id(i, ny), id(i + 1, ny)], span));
    }
    let mesh = Mesh { element_type: et, nodes, elements, dirichlet: vec![], neumann: vec![] };
    StructuredMesh { mesh, side_nodes, side_edges, side_node_params }
}

fn build_q8(nx: usize, ny: usize, map: &CornerMap) -> StructuredMesh {
    // Serendipity grid: the (2nx+1) x (2ny+1) lattice minus odd-odd points.
    let w = 2 * nx + 1;
    let h = 2 * ny + 1;
    let mut lattice = vec![usize::MAX; w * h];
    let mut nodes = Vec::new();
    for j in 0..h {
        for i in 0..w {
            if i % 2 == 1 && j % 2 == 1 {
                continue;
            }
            lattice[j * w + i] = nodes.len();
            nodes.push(map.map(i as f64 / (w - 1) as f64, j as f64 / (h - 1) as f64));
        }
    }
    let id = |i: usize, j: usize| lattice[j * w + i];
    let mut elements = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let (bi, bj) = (2 * i, 2 * j);
            elements.push(vec![
                id(bi, bj),
                id(bi + 2, bj),
                id(bi + 2, bj + 2),
                id(bi, bj + 2),
                id(bi + 1, bj),
                id(bi + 2, bj + 1),
                id(bi + 1, bj + 2),
                id(bi, bj + 1),
            ]);
        }
    }
    let mut side_nodes: [Vec<usize>; 4] = Default::default();
    let mut side_node_params: [Vec<f64>; 4] = Default::default();
    for j in 0..h {
        side_nodes[0].push(id(0, j));
        side_node_params[0].push(j as f64 / (h - 1) as f64);
        side_nodes[1].push(id(w - 1, j));
        side_node_params[1].push(j as f64 / (h - 1) as f64);
    }
    for i in 0..w {
        side_nodes[2].push(id(i, 0));
        side_node_params[2].push(i as f64 / (w - 1) as f64);
        side_nodes[3].push(id(i, h - 1));
        side_node_params[3].push(i as f64 / (w - 1) as f64);
    }
    let mut side_edges: [Vec<(Vec<usize>, [f64; 2])>; 4] = Default::default();
    for j in 0..ny {
        let span = [j as f64 / ny as f64, (j + 1) as f64 / ny as f64];
        side_edges[0].push((vec![id(0, 2 * j), id(0, 2 * j + 2), id(0, 2 * j + 1)], span));
        side_edges[1]
            .push((vec![id(w - 1, 2 * j), id(w - 1, 2 * j + 2), id(w - 1, 2 * j + 1)], span));
    }
    for i in 0..nx {
        let span = [i as f64 / nx as f64, (i + 1) as f64 / nx as f64];
        side_edges[2].push((vec![id(2 * i, 0), id(2 * i + 2, 0), id(2 * i + 1, 0)], span));
        side_edges[3]
            .push((vec![id(2 * i, h - 1), id(2 * i + 2, h - 1), id(2 * i + 1, h - 1)], span));
    }
    let mesh =
        Mesh { element_type: ElementType::Q8, nodes, elements, dirichlet: vec![], neumann: vec![] };
    StructuredMesh { mesh, side_nodes, side_edges, side_node_params }
}
