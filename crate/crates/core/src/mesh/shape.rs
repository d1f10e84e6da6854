//! Isoparametric shape functions on the reference elements.
//!
//! Reference domains: quads on [-1,1]^2, T3 on the unit triangle with
//! vertices (0,0), (1,0), (0,1). Q8 uses the serendipity basis. Local node
//! order is counterclockwise corners first, then (for Q8) the mid-edge nodes
//! bottom, right, top, left.

use super::ElementType;

/// Upper bound on nodes per element, for stack-allocated buffers.
pub const MAX_NODES: usize = 8;

const Q_CORNERS: [[f64; 2]; 4] = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];

/// Shape function values `N_I(xi)`; returns the buffer and the node count.
pub fn shape_values(et: ElementType, xi: [f64; 2]) -> ([f64; MAX_NODES], usize) {
    let [s, t] = xi;
    let mut n = [0.0; MAX_NODES];
    match et {
        ElementType::T3 => {
            n[0] = 1.0 - s - t;
            n[1] = s;
            n[2] = t;
            (n, 3)
        }
        ElementType::Q4 => {
            for (i, c) in Q_CORNERS.iter().enumerate() {
                n[i] = 0.25 * (1.0 + c[0] * s) * (1.0 + c[1] * t);
            }
            (n, 4)
        }
        ElementType::Q8 => {
            for (i, c) in Q_CORNERS.iter().enumerate() {
                n[i] = 0.25 * (1.0 + c[0] * s) * (1.0 + c[1] * t) * (c[0] * s + c[1] * t - 1.0);
            }
            n[4] = 0.5 * (1.0 - s * s) * (1.0 - t);
            n[5] = 0.5 * (1.0 + s) * (1.0 - t * t);
            n[6] = 0.5 * (1.0 - s * s) * (1.0 + t);
            n[7] = 0.5 * (1.0 - s) * (1.0 - t * t);
            (n, 8)
        }
    }
}

/// Reference gradients `dN_I/dxi`; returns the buffer and the node count.
pub fn shape_gradients(et: ElementType, xi: [f64; 2]) -> ([[f64; 2]; MAX_NODES], usize) {
    let [s, t] = xi;
    let mut g = [[0.0; 2]; MAX_NODES];
    match et {
        ElementType::T3 => {
            g[0] = [-1.0, -1.0];
            g[1] = [1.0, 0.0];
            g[2] = [0.0, 1.0];
            (g, 3)
        }
        ElementType::Q4 => {
            for (i, c) in Q_CORNERS.iter().enumerate() {
                g[i] = [0.25 * c[0] * (1.0 + c[1] * t), 0.25 * c[1] * (1.0 + c[0] * s)];
            }
            (g, 4)
        }
        ElementType::Q8 => {
            for (i, c) in Q_CORNERS.iter().enumerate() {
                g[i] = [
                    0.25 * c[0] * (1.0 + c[1] * t) * (2.0 * c[0] * s + c[1] * t),
                    0.25 * c[1] * (1.0 + c[0] * s) * (c[0] * s + 2.0 * c[1] * t),
                ];
            }
            g[4] = [-s * (1.0 - t), -0.5 * (1.0 - s * s)];
            g[5] = [0.5 * (1.0 - t * t), -t * (1.0 + s)];
            g[6] = [-s * (1.0 + t), 0.5 * (1.0 - s * s)];
            g[7] = [-0.5 * (1.0 - t * t), -t * (1.0 - s)];
            (g, 8)
        }
    }
}

/// Reference coordinates of the element's own nodes (for Kronecker checks).
pub fn node_reference_coords(et: ElementType) -> ([[f64; 2]; MAX_NODES], usize) {
    let mut c = [[0.0; 2]; MAX_NODES];
    match et {
        ElementType::T3 => {
            c[0] = [0.0, 0.0];
            c[1] = [1.0, 0.0];
            c[2] = [0.0, 1.0];
            (c, 3)
        }
        ElementType::Q4 => {
            c[..4].copy_from_slice(&Q_CORNERS);
            (c, 4)
        }
        ElementType::Q8 => {
            c[..4].copy_from_slice(&Q_CORNERS);
            c[4] = [0.0, -1.0];
            c[5] = [1.0, 0.0];
            c[6] = [0.0, 1.0];
            c[7] = [-1.0, 0.0];
            (c, 8)
        }
    }
}

/// 1D shape functions along a boundary edge, parametrized by t in [-1,1].
/// Node order matches [`NeumannBc::edge`]: ends first, Q8 midside last.
/// Returns `(values, dvalues/dt, node count)`.
pub fn edge_shape_values(et: ElementType, t: f64) -> ([f64; 3], [f64; 3], usize) {
    match et {
        ElementType::Q8 => (
            [0.5 * t * (t - 1.0), 0.5 * t * (t + 1.0), 1.0 - t * t],
            [t - 0.5, t + 0.5, -2.0 * t],
            3,
        ),
        _ => ([0.5 * (1.0 - t), 0.5 * (1.0 + t), 0.0], [-0.5, 0.5, 0.0], 2),
    }
}
