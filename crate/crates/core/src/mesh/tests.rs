use super::shape::node_reference_coords;
use super::*;
use alloc::vec;
use alloc::vec::Vec;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

fn rand_unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn random_ref_point(et: ElementType, rng: &mut ChaCha8Rng) -> [f64; 2] {
    match et {
        ElementType::T3 => {
            let (mut a, mut b) = (rand_unit(rng), rand_unit(rng));
            if a + b > 1.0 {
                a = 1.0 - a;
                b = 1.0 - b;
            }
            [a, b]
        }
        _ => [2.0 * rand_unit(rng) - 1.0, 2.0 * rand_unit(rng) - 1.0],
    }
}

#[test]
fn q4_center_values() {
    let (n, count) = shape_values(ElementType::Q4, [0.0, 0.0]);
    assert_eq!(count, 4);
    for v in &n[..4] {
        assert!((v - 0.25).abs() < 1e-15);
    }
}

#[test]
fn t3_barycenter() {
    let (n, count) = shape_values(ElementType::T3, [1.0 / 3.0, 1.0 / 3.0]);
    assert_eq!(count, 3);
    for v in &n[..3] {
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
    }
}

#[test]
fn kronecker_property_all_types() {
    for et in [ElementType::T3, ElementType::Q4, ElementType::Q8] {
        let (coords, count) = node_reference_coords(et);
        for i in 0..count {
            let (n, _) = shape_values(et, coords[i]);
            for j in 0..count {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (n[j] - expect).abs() < 1e-14,
                    "{et:?}: N_{j} at node {i} = {}",
                    n[j]
                );
            }
        }
    }
}

#[test]
fn partition_of_unity_and_gradient_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for et in [ElementType::T3, ElementType::Q4, ElementType::Q8] {
        for _ in 0..100 {
            let p = random_ref_point(et, &mut rng);
            let (n, count) = shape_values(et, p);
            let sum: f64 = n[..count].iter().sum();
            assert!((sum - 1.0).abs() < 1e-13, "{et:?} PoU at {p:?}: {sum}");
            let (g, _) = shape_gradients(et, p);
            for a in 0..2 {
                let gs: f64 = g[..count].iter().map(|v| v[a]).sum();
                assert!(gs.abs() < 1e-13, "{et:?} grad sum at {p:?}: {gs}");
            }
        }
    }
}

#[test]
fn gauss_weight_sums() {
    assert!((gauss_rule(ElementType::Q4).weight_sum() - 4.0).abs() < 1e-15);
    assert!((gauss_rule(ElementType::Q8).weight_sum() - 4.0).abs() < 1e-14);
    assert!((gauss_rule(ElementType::T3).weight_sum() - 0.5).abs() < 1e-15);
}

#[test]
fn q4_rule_integrates_xi_squared() {
    let rule = gauss_rule(ElementType::Q4);
    let integral: f64 =
        rule.points.iter().zip(&rule.weights).map(|(p, w)| w * p[0] * p[0]).sum();
    assert!((integral - 4.0 / 3.0).abs() < 1e-14);
}

#[test]
fn q8_rule_integrates_quartics() {
    // 3x3 Gauss is exact through degree 5: check xi^4 * eta^2 -> (2/5)(2/3)
    let rule = gauss_rule(ElementType::Q8);
    let integral: f64 = rule
        .points
        .iter()
        .zip(&rule.weights)
        .map(|(p, w)| w * p[0].powi(4) * p[1] * p[1])
        .sum();
    assert!((integral - (2.0 / 5.0) * (2.0 / 3.0)).abs() < 1e-14);
}

#[test]
fn structured_counts() {
    let m = build_structured_mesh(1, 1, ElementType::Q4, &CornerMap::unit_square()).unwrap();
    assert_eq!(m.mesh.n_nodes(), 4);
    assert_eq!(m.mesh.n_elements(), 1);
    let corner_set: Vec<[f64; 2]> = m.mesh.nodes.clone();
    for c in [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]] {
        assert!(corner_set.iter().any(|n| n == &c));
    }

    let beam =
        build_structured_mesh(50, 50, ElementType::Q4, &CornerMap::rectangle(0.0, 0.0, 4.0, 1.0))
            .unwrap();
    assert_eq!(beam.mesh.n_nodes(), 2601);
    assert_eq!(beam.mesh.n_elements(), 2500);

    let cook = CookGeometry::standard();
    let q8 = build_structured_mesh(30, 30, ElementType::Q8, &cook.corner_map()).unwrap();
    assert_eq!(q8.mesh.n_elements(), 900);
    assert_eq!(q8.mesh.n_nodes(), 61 * 61 - 900); // 2821

    let t3 = build_structured_mesh(4, 3, ElementType::T3, &CornerMap::unit_square()).unwrap();
    assert_eq!(t3.mesh.n_elements(), 24);
}

#[test]
fn structured_rejects_degenerate_map() {
    // Flipped orientation -> negative Jacobian
    let bad = CornerMap { corners: [[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]] };
    match build_structured_mesh(2, 2, ElementType::Q4, &bad) {
        Err(crate::error::Error::BadJacobian { .. }) => {}
        other => panic!("expected BadJacobian, got {other:?}"),
    }
}

#[test]
fn unit_square_q4_detj() {
    let m = build_structured_mesh(1, 1, ElementType::Q4, &CornerMap::unit_square()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10 {
        let p = random_ref_point(ElementType::Q4, &mut rng);
        let (det, _) = m.mesh.physical_gradients(0, p).unwrap();
        assert!((det - 0.25).abs() < 1e-14);
    }
}

#[test]
fn stretched_element_detj() {
    let m =
        build_structured_mesh(1, 1, ElementType::Q4, &CornerMap::rectangle(0.0, 0.0, 2.0, 1.0))
            .unwrap();
    let (det, _) = m.mesh.physical_gradients(0, [0.3, -0.4]).unwrap();
    assert!((det - 0.5).abs() < 1e-14);
}

#[test]
fn linear_field_gradient_exact() {
    // u = 2x + 3y on a distorted Q4 patch
    let map = CornerMap { corners: [[0.0, 0.0], [1.3, 0.1], [1.1, 1.2], [-0.2, 0.9]] };
    let m = build_structured_mesh(2, 2, ElementType::Q4, &map).unwrap();
    let nodal: Vec<f64> = m.mesh.nodes.iter().map(|p| 2.0 * p[0] + 3.0 * p[1]).collect();
    let rule = gauss_rule(ElementType::Q4);
    for e in 0..m.mesh.n_elements() {
        for p in &rule.points {
            let (_, grads) = m.mesh.physical_gradients(e, *p).unwrap();
            let conn = &m.mesh.elements[e];
            let mut g = [0.0; 2];
            for (i, gn) in grads.iter().enumerate() {
                g[0] += gn[0] * nodal[conn[i]];
                g[1] += gn[1] * nodal[conn[i]];
            }
            assert!((g[0] - 2.0).abs() < 1e-12 && (g[1] - 3.0).abs() < 1e-12);
        }
    }
}

#[test]
fn q8_reproduces_quadratic_fields() {
    // parallelogram: affine map, where quadratic completeness is exact
    let map = CornerMap { corners: [[0.0, 0.0], [2.0, 0.2], [2.5, 1.9], [0.5, 1.7]] };
    let m = build_structured_mesh(2, 2, ElementType::Q8, &map).unwrap();
    // check value and gradient of x^2 + x y at the quadrature points
    let f = |p: [f64; 2]| p[0] * p[0] + p[0] * p[1];
    let nodal: Vec<f64> = m.mesh.nodes.iter().map(|p| f(*p)).collect();
    let rule = gauss_rule(ElementType::Q8);
    for e in 0..m.mesh.n_elements() {
        for p in &rule.points {
            let x = m.mesh.position(e, *p);
            let v = m.mesh.interpolate(e, *p, &nodal);
            assert!((v - f(x)).abs() < 1e-11, "value {v} vs {}", f(x));
            let (_, grads) = m.mesh.physical_gradients(e, *p).unwrap();
            let conn = &m.mesh.elements[e];
            let mut g = [0.0; 2];
            for (i, gn) in grads.iter().enumerate() {
                g[0] += gn[0] * nodal[conn[i]];
                g[1] += gn[1] * nodal[conn[i]];
            }
            assert!((g[0] - (2.0 * x[0] + x[1])).abs() < 1e-10);
            assert!((g[1] - x[0]).abs() < 1e-10);
        }
    }
}

#[test]
fn mesh_area_matches_analytic() {
    let rect =
        build_structured_mesh(7, 5, ElementType::Q4, &CornerMap::rectangle(0.0, 0.0, 4.0, 1.0))
            .unwrap();
    assert!((rect.mesh.area() - 4.0).abs() < 1e-10);

    let tri = build_structured_mesh(6, 6, ElementType::T3, &CornerMap::unit_square()).unwrap();
    assert!((tri.mesh.area() - 1.0).abs() < 1e-10);

    // Cook trapezoid: shoelace area 1440
    let cook = CookGeometry::standard();
    let m = build_structured_mesh(8, 8, ElementType::Q8, &cook.corner_map()).unwrap();
    assert!((m.mesh.area() - 1440.0).abs() < 1e-9);
}

#[test]
fn validate_catches_out_of_range_index() {
    let mut sm = build_structured_mesh(1, 1, ElementType::Q4, &CornerMap::unit_square()).unwrap();
    sm.mesh.elements[0][2] = 4; // == node_count
    assert!(matches!(sm.mesh.validate(), Err(crate::error::Error::InvalidMesh(_))));
}

#[test]
fn validate_catches_conflicting_bc() {
    let mut sm = build_structured_mesh(1, 1, ElementType::Q4, &CornerMap::unit_square()).unwrap();
    let edge = sm.side_edges(Side::Right)[0].0.clone();
    sm.mesh.dirichlet.push(DirichletBc { node: edge[0], ux: Some(0.0), uy: None });
    sm.mesh.neumann.push(NeumannBc { edge, tx: 1.0, ty: 0.0 });
    assert!(sm.mesh.validate().is_err());
}

#[test]
fn validate_accepts_structured_meshes() {
    for et in [ElementType::T3, ElementType::Q4, ElementType::Q8] {
        let sm = build_structured_mesh(3, 2, et, &CornerMap::rectangle(0.0, 0.0, 2.0, 1.0)).unwrap();
        sm.mesh.validate().unwrap();
    }
}

#[test]
fn side_tagging_is_consistent() {
    let sm = build_structured_mesh(4, 3, ElementType::Q8, &CornerMap::unit_square()).unwrap();
    for side in Side::ALL {
        let nodes = sm.side_nodes(side);
        for &n in nodes {
            let p = sm.mesh.nodes[n];
            match side {
                Side::Left => assert!(p[0].abs() < 1e-14),
                Side::Right => assert!((p[0] - 1.0).abs() < 1e-14),
                Side::Bottom => assert!(p[1].abs() < 1e-14),
                Side::Top => assert!((p[1] - 1.0).abs() < 1e-14),
            }
        }
        for (edge, span) in sm.side_edges(side) {
            assert_eq!(edge.len(), 3);
            assert!(span[0] < span[1]);
        }
    }
    // edges listed by validate() must include every side edge
    let mesh_edges = sm.mesh.element_edges();
    for (edge, _) in sm.side_edges(Side::Right) {
        let mut key = edge.clone();
        key.sort_unstable();
        assert!(mesh_edges.iter().any(|e| {
            let mut s = e.clone();
            s.sort_unstable();
            s == key
        }));
    }
}

#[test]
fn cook_geometry_validation() {
    let mut g = CookGeometry::standard();
    g.validate().unwrap();
    g.traction_span = [0.7, 0.4];
    assert!(g.validate().is_err());
    let (a, b) = CookGeometry::standard().clamp_segment();
    assert_eq!(a, [0.0, 0.0]);
    assert_eq!(b, [0.0, 44.0]);
}

#[test]
fn edge_shape_functions_partition_unity() {
    for et in [ElementType::Q4, ElementType::Q8] {
        let (pts, _) = edge_rule(et);
        for t in pts {
            let (n, _, count) = edge_shape_values(et, t);
            let sum: f64 = n[..count].iter().sum();
            assert!((sum - 1.0).abs() < 1e-14);
        }
    }
    // Q8 edge functions are Kronecker at t = -1, 1, 0
    let (n, _, _) = edge_shape_values(ElementType::Q8, -1.0);
    assert_eq!(&n[..3], &[1.0, 0.0, 0.0]);
    let (n, _, _) = edge_shape_values(ElementType::Q8, 0.0);
    assert_eq!(&n[..3], &[0.0, 0.0, 1.0]);
}
