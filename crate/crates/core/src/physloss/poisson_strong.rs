//! Strong-form Poisson loss: mean-squared interior residual of
//! -div(k grad T) - f plus Dirichlet and Neumann penalty terms.
//!
//! Second derivatives of linear shape functions vanish, so the interior
//! operator is an element-averaged flux-divergence surrogate: the divergence
//! of k grad T over an element is estimated from edge-midpoint fluxes
//! averaged across the neighboring elements (for T3 the flux is piecewise
//! constant and this reduces to normal-flux jumps; for Q4 the edge-midpoint
//! fluxes carry the bilinear second differences).

use super::losses::LossBundle;
use crate::error::{Error, Result};
use crate::fem::MaterialField;
use crate::math;
use crate::mesh::{edge_rule, gauss_rule, ElementType, Mesh};
use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

pub struct PoissonStrong {
    mesh: Mesh,
    conductivity: MaterialField,
    source: Box<dyn Fn([f64; 2]) -> f64>,
    edges: Vec<EdgeAdj>,
    areas: Vec<f64>,
    neumann_owned: Vec<NeumannEdge>,
}

/// One mesh edge with its owning element(s) and local edge ids.
struct EdgeAdj {
    nodes: [usize; 2],
    a: (usize, usize),
    b: Option<(usize, usize)>,
}

struct NeumannEdge {
    element: usize,
    ref_ends: [[f64; 2]; 2],
    end_nodes: [usize; 2],
    qbar: f64,
}

/// Reference coordinates of the midpoint of a local edge.
fn edge_mid_ref(et: ElementType, local: usize) -> [f64; 2] {
    match et {
        ElementType::T3 => [[0.5, 0.0], [0.5, 0.5], [0.0, 0.5]][local],
        _ => [[0.0, -1.0], [1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]][local],
    }
}

fn local_edges(et: ElementType) -> &'static [(usize, usize)] {
    match et {
        ElementType::T3 => &[(0, 1), (1, 2), (2, 0)],
        _ => &[(0, 1), (1, 2), (2, 3), (3, 0)],
    }
}

impl PoissonStrong {
    pub fn new(
        mesh: Mesh,
        conductivity: MaterialField,
        source: Box<dyn Fn([f64; 2]) -> f64>,
    ) -> Result<Self> {
        if mesh.element_type == ElementType::Q8 {
            return Err(Error::Invalid(
                "strong-form Poisson loss supports T3 and Q4 meshes".into(),
            ));
        }
        conductivity.validate_len(&mesh)?;
        let edges = build_adjacency(&mesh);
        let rule = gauss_rule(mesh.element_type);
        let mut areas = vec![0.0; mesh.n_elements()];
        for (e, area) in areas.iter_mut().enumerate() {
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                let (_, det) = mesh.jacobian(e, *p);
                *area += w * det;
            }
        }
        let neumann_owned = locate_neumann_edges(&mesh)?;
        Ok(PoissonStrong { mesh, conductivity, source, edges, areas, neumann_owned })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    /// Loss terms (interior, dirichlet, neumann); the total is their sum.
    pub fn terms(&self, t: &[f64]) -> Result<(f64, f64, f64)> {
        let (i, d, n, _) = self.eval_full(t)?;
        Ok((i, d, n))
    }

    pub fn loss(&self, t: &[f64]) -> Result<LossBundle> {
        let (interior, dirichlet, neumann, grad) = self.eval_full(t)?;
        Ok(LossBundle { loss: interior + dirichlet + neumann, grad_u: grad })
    }

    fn eval_full(&self, t: &[f64]) -> Result<(f64, f64, f64, Vec<f64>)> {
        let nn = self.mesh.n_nodes();
        if t.len() != nn {
            return Err(Error::Invalid(alloc::format!(
                "field has {} values for {nn} nodes",
                t.len()
            )));
        }
        let mut grad = vec![0.0; nn];
        let interior = self.interior(t, &mut grad)?;

        let mut dirichlet = 0.0;
        let n_bt = self.mesh.dirichlet.len().max(1) as f64;
        for bc in &self.mesh.dirichlet {
            if let Some(tbar) = bc.ux {
                let diff = t[bc.node] - tbar;
                dirichlet += diff * diff / n_bt;
                grad[bc.node] += 2.0 * diff / n_bt;
            }
        }

        let mut neumann = 0.0;
        let (pts, _) = edge_rule(self.mesh.element_type);
        let n_bq = (self.neumann_owned.len() * pts.len()).max(1) as f64;
        for edge in &self.neumann_owned {
            let n_out = self.outward_normal(edge.element, edge.end_nodes);
            for &tq in &pts {
                let xi = [
                    0.5 * (1.0 - tq) * edge.ref_ends[0][0] + 0.5 * (1.0 + tq) * edge.ref_ends[1][0],
                    0.5 * (1.0 - tq) * edge.ref_ends[0][1] + 0.5 * (1.0 + tq) * edge.ref_ends[1][1],
                ];
                let (_, grads) = self.mesh.physical_gradients(edge.element, xi)?;
                let conn = &self.mesh.elements[edge.element];
                let kq = self.conductivity.at(&self.mesh, edge.element, xi);
                let mut flux = 0.0;
                for (i, g) in grads.iter().enumerate() {
                    flux += kq * (g[0] * n_out[0] + g[1] * n_out[1]) * t[conn[i]];
                }
                let diff = flux - edge.qbar;
                neumann += diff * diff / n_bq;
                for (i, g) in grads.iter().enumerate() {
                    grad[conn[i]] += 2.0 * diff * kq * (g[0] * n_out[0] + g[1] * n_out[1]) / n_bq;
                }
            }
        }
        Ok((interior, dirichlet, neumann, grad))
    }

    /// Flux-divergence interior residual, with the analytic gradient
    /// accumulated into `grad`.
    fn interior(&self, t: &[f64], grad: &mut [f64]) -> Result<f64> {
        let n_el = self.mesh.n_elements();
        let ne = n_el.max(1) as f64;
        let mut div = vec![0.0; n_el];
        // per edge: averaged midpoint flux, signed into both owners
        struct EdgeEval {
            length: f64,
            n_out_a: [f64; 2],
        }
        let mut evals: Vec<EdgeEval> = Vec::with_capacity(self.edges.len());
        let flux_at = |elem: usize, local: usize, t: &[f64]| -> Result<([f64; 2], Vec<[f64; 2]>, f64)> {
            let xi = edge_mid_ref(self.mesh.element_type, local);
            let (_, grads) = self.mesh.physical_gradients(elem, xi)?;
            let kq = self.conductivity.at(&self.mesh, elem, xi);
            let conn = &self.mesh.elements[elem];
            let mut f = [0.0; 2];
            for (i, g) in grads.iter().enumerate() {
                f[0] += kq * g[0] * t[conn[i]];
                f[1] += kq * g[1] * t[conn[i]];
            }
            Ok((f, grads, kq))
        };
        for edge in &self.edges {
            let (pa, pb) = (self.mesh.nodes[edge.nodes[0]], self.mesh.nodes[edge.nodes[1]]);
            let length = math::hypot(pb[0] - pa[0], pb[1] - pa[1]);
            let n_out_a = self.outward_normal(edge.a.0, edge.nodes);
            let (fa, _, _) = flux_at(edge.a.0, edge.a.1, t)?;
            let fbar = match edge.b {
                Some((eb, lb)) => {
                    let (fb, _, _) = flux_at(eb, lb, t)?;
                    [0.5 * (fa[0] + fb[0]), 0.5 * (fa[1] + fb[1])]
                }
                None => fa,
            };
            let outflow = length * (fbar[0] * n_out_a[0] + fbar[1] * n_out_a[1]);
            div[edge.a.0] += outflow / self.areas[edge.a.0];
            if let Some((eb, _)) = edge.b {
                div[eb] -= outflow / self.areas[eb];
            }
            evals.push(EdgeEval { length, n_out_a });
        }
        let mut interior = 0.0;
        let mut r = vec![0.0; n_el];
        for e in 0..n_el {
            let cen = self.centroid(e);
            r[e] = -div[e] - (self.source)(cen);
            interior += r[e] * r[e] / ne;
        }
        // gradient: chain through each edge's flux terms
        for (edge, ev) in self.edges.iter().zip(&evals) {
            let owners_arr = [edge.a, edge.b.unwrap_or(edge.a)];
            let owners = &owners_arr[..if edge.b.is_some() { 2 } else { 1 }];
            let avg = if edge.b.is_some() { 0.5 } else { 1.0 };
            for &(elem, local) in owners {
                let xi = edge_mid_ref(self.mesh.element_type, local);
                let (_, grads) = self.mesh.physical_gradients(elem, xi)?;
                let kq = self.conductivity.at(&self.mesh, elem, xi);
                let conn = &self.mesh.elements[elem];
                for (i, g) in grads.iter().enumerate() {
                    let d_outflow = ev.length
                        * avg
                        * kq
                        * (g[0] * ev.n_out_a[0] + g[1] * ev.n_out_a[1]);
                    // d(div_a) = +d_outflow / A_a ; d(r_a) = -that
                    grad[conn[i]] += 2.0 * r[edge.a.0] * (-d_outflow / self.areas[edge.a.0]) / ne;
                    if let Some((eb, _)) = edge.b {
                        grad[conn[i]] += 2.0 * r[eb] * (d_outflow / self.areas[eb]) / ne;
                    }
                }
            }
        }
        Ok(interior)
    }

    fn centroid(&self, e: usize) -> [f64; 2] {
        let conn = &self.mesh.elements[e];
        let mut c = [0.0; 2];
        for &i in conn {
            c[0] += self.mesh.nodes[i][0] / conn.len() as f64;
            c[1] += self.mesh.nodes[i][1] / conn.len() as f64;
        }
        c
    }

    /// Unit normal of the edge, oriented out of `elem`.
    fn outward_normal(&self, elem: usize, nodes: [usize; 2]) -> [f64; 2] {
        let (a, b) = (self.mesh.nodes[nodes[0]], self.mesh.nodes[nodes[1]]);
        let tx = b[0] - a[0];
        let ty = b[1] - a[1];
        let len = math::hypot(tx, ty);
        let mut n = [ty / len, -tx / len];
        let cen = self.centroid(elem);
        let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
        if (mid[0] - cen[0]) * n[0] + (mid[1] - cen[1]) * n[1] < 0.0 {
            n = [-n[0], -n[1]];
        }
        n
    }
}

fn build_adjacency(mesh: &Mesh) -> Vec<EdgeAdj> {
    let mut keyed: Vec<((usize, usize), (usize, usize))> = Vec::new();
    for (e, conn) in mesh.elements.iter().enumerate() {
        for (l, &(a, b)) in local_edges(mesh.element_type).iter().enumerate() {
            let key = (conn[a].min(conn[b]), conn[a].max(conn[b]));
            keyed.push((key, (e, l)));
        }
    }
    keyed.sort_unstable();
    let mut out = Vec::new();
    let mut i = 0;
    while i < keyed.len() {
        let (key, owner_a) = keyed[i];
        if i + 1 < keyed.len() && keyed[i + 1].0 == key {
            out.push(EdgeAdj { nodes: [key.0, key.1], a: owner_a, b: Some(keyed[i + 1].1) });
            i += 2;
        } else {
            out.push(EdgeAdj { nodes: [key.0, key.1], a: owner_a, b: None });
            i += 1;
        }
    }
    out
}

fn locate_neumann_edges(mesh: &Mesh) -> Result<Vec<NeumannEdge>> {
    let (ref_coords, _) = crate::mesh::node_reference_coords(mesh.element_type);
    let mut out = Vec::new();
    for bc in &mesh.neumann {
        let ends = [bc.edge[0], bc.edge[1]];
        let mut found = None;
        for (e, conn) in mesh.elements.iter().enumerate() {
            let la = conn.iter().position(|&n| n == ends[0]);
            let lb = conn.iter().position(|&n| n == ends[1]);
            if let (Some(la), Some(lb)) = (la, lb) {
                found = Some((e, la, lb));
                break;
            }
        }
        let (element, la, lb) = found.ok_or_else(|| {
            Error::InvalidMesh(alloc::format!("edge {:?} not in any element", bc.edge))
        })?;
        out.push(NeumannEdge {
            element,
            ref_ends: [ref_coords[la], ref_coords[lb]],
            end_nodes: ends,
            qbar: bc.tx,
        });
    }
    Ok(out)
}
