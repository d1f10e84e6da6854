use super::*;
use crate::fem::{
    apply_dirichlet, dense_direct_solve, dirichlet_constraints, internal_force_neohookean,
    spectral_radius, ElasticParams, MaterialField, MaterialModel,
};
use crate::math;
use crate::mesh::{build_structured_mesh, CornerMap, DirichletBc, ElementType, Mesh, NeumannBc, Side};
use crate::operator::{forward, register_params, TransolverConfig};
use crate::tensor::Tensor;
use alloc::vec;
use alloc::vec::Vec;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

fn runif(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Beam on [0,4]x[0,1], left edge clamped, right edge loaded with t_y.
fn beam(nx: usize, ny: usize, ty: f64) -> (Mesh, BcAnsatz) {
    let sm =
        build_structured_mesh(nx, ny, ElementType::Q4, &CornerMap::rectangle(0.0, 0.0, 4.0, 1.0))
            .unwrap();
    let mut mesh = sm.mesh.clone();
    for &n in sm.side_nodes(Side::Left) {
        mesh.dirichlet.push(DirichletBc { node: n, ux: Some(0.0), uy: Some(0.0) });
    }
    for (edge, _) in sm.side_edges(Side::Right) {
        mesh.neumann.push(NeumannBc { edge: edge.clone(), tx: 0.0, ty });
    }
    let ansatz = BcAnsatz::segment_clamp(&mesh.nodes, [0.0, 0.0], [0.0, 1.0], 4.0);
    (mesh, ansatz)
}

#[test]
fn ansatz_zeroes_clamped_nodes_exactly() {
    let (mesh, ansatz) = beam(4, 2, -0.1);
    ansatz.validate_against(&mesh, 2).unwrap();
    let n = mesh.n_nodes();
    let raw = Tensor::filled(&[n, 2], 3.7);
    let u = ansatz.apply(&raw).unwrap();
    for bc in &mesh.dirichlet {
        assert_eq!(u[2 * bc.node], 0.0);
        assert_eq!(u[2 * bc.node + 1], 0.0);
    }
    // clamped at x = 0: multiplier is x / L
    for (i, p) in mesh.nodes.iter().enumerate() {
        assert!((ansatz.mult_x[i] - p[0] / 4.0).abs() < 1e-15);
    }
}

#[test]
fn identity_ansatz_is_passthrough() {
    let ansatz = BcAnsatz::unconstrained(5);
    let raw = Tensor::matrix(5, 2, (0..10).map(|i| i as f64).collect()).unwrap();
    let u = ansatz.apply(&raw).unwrap();
    for i in 0..5 {
        assert_eq!(u[2 * i], raw.at(i, 0));
        assert_eq!(u[2 * i + 1], raw.at(i, 1));
    }
}

#[test]
fn ansatz_chain_rule_factor() {
    let (mesh, ansatz) = beam(4, 2, 0.0);
    let n = mesh.n_nodes();
    let grad_u: Vec<f64> = (0..2 * n).map(|i| i as f64).collect();
    let g = ansatz.chain(&grad_u, 2).unwrap();
    for (i, p) in mesh.nodes.iter().enumerate() {
        assert!((g.at(i, 0) - (p[0] / 4.0) * grad_u[2 * i]).abs() < 1e-14);
        assert!((g.at(i, 1) - (p[0] / 4.0) * grad_u[2 * i + 1]).abs() < 1e-14);
    }
}

#[test]
fn ansatz_rejects_inhomogeneous_dirichlet() {
    let (mut mesh, ansatz) = beam(2, 2, 0.0);
    mesh.dirichlet[0].ux = Some(0.5);
    assert!(ansatz.validate_against(&mesh, 2).is_err());
}

#[test]
fn linear_loss_at_zero_and_at_solution() {
    let (mesh, _) = beam(4, 2, -0.1);
    let material = MaterialModel::PlaneStress(ElasticParams::constant(100.0, 0.25));
    let energy = LinearEnergy::new(mesh.clone(), material).unwrap();
    let n_dofs = 2 * mesh.n_nodes();

    let zero = vec![0.0; n_dofs];
    let b0 = energy.loss(&zero).unwrap();
    assert_eq!(b0.loss, 0.0);
    for (g, f) in b0.grad_u.iter().zip(energy.load()) {
        assert!((g + f).abs() < 1e-14);
    }

    let sys = apply_dirichlet(
        energy.stiffness(),
        energy.load(),
        &dirichlet_constraints(&mesh, 2).unwrap(),
    )
    .unwrap();
    let u = sys.reconstruct(&dense_direct_solve(&sys.reduced_k, &sys.reduced_f).unwrap());
    let b = energy.loss(&u).unwrap();
    let grad_free = sys.restrict(&b.grad_u);
    assert!(math::norm2(&grad_free) < 1e-9, "free gradient {}", math::norm2(&grad_free));
    // at the minimum, loss = -1/2 u.F
    let expect = -0.5 * math::dot(&u, energy.load());
    assert!((b.loss - expect).abs() < 1e-9 * expect.abs().max(1.0));
}

#[test]
fn linear_loss_gradient_matches_finite_differences() {
    let sm = build_structured_mesh(2, 2, ElementType::Q4, &CornerMap::unit_square()).unwrap();
    let mut mesh = sm.mesh.clone();
    for (edge, _) in sm.side_edges(Side::Right) {
        mesh.neumann.push(NeumannBc { edge: edge.clone(), tx: 0.5, ty: -0.25 });
    }
    let material = MaterialModel::PlaneStrain(ElasticParams::constant(50.0, 0.3));
    let energy = LinearEnergy::new(mesh.clone(), material).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n_dofs = 2 * mesh.n_nodes();
    let u: Vec<f64> = (0..n_dofs).map(|_| 0.1 * (2.0 * runif(&mut rng) - 1.0)).collect();
    let b = energy.loss(&u).unwrap();
    let h = 1e-6;
    for d in 0..n_dofs {
        let mut up = u.clone();
        up[d] += h;
        let lp = energy.loss(&up).unwrap().loss;
        up[d] -= 2.0 * h;
        let lm = energy.loss(&up).unwrap().loss;
        let fd = (lp - lm) / (2.0 * h);
        let rel = (b.grad_u[d] - fd).abs() / b.grad_u[d].abs().max(fd.abs()).max(1e-8);
        assert!(rel < 1e-8, "dof {d}: grad {} vs fd {}", b.grad_u[d], fd);
    }
    // loss value equals the quadratic form route
    let quad = 0.5 * energy.stiffness().quadratic_form(&u) - math::dot(&u, energy.load());
    assert!((b.loss - quad).abs() < 1e-12 * quad.abs().max(1.0));
}

#[test]
fn neohookean_loss_zero_states() {
    let (mesh, _) = beam(3, 2, 0.0);
    let material = MaterialModel::NeoHookean(ElasticParams::constant(100.0, 0.25));
    let energy = NeoHookeanEnergy::new(mesh.clone(), material);
    let n = mesh.n_nodes();
    let zero = vec![0.0; 2 * n];
    let b = energy.loss(&zero).unwrap();
    assert_eq!(b.loss, 0.0);
    assert!(math::norm2(&b.grad_u) < 1e-12);

    let mut translation = vec![0.0; 2 * n];
    for i in 0..n {
        translation[2 * i] = 0.4;
        translation[2 * i + 1] = -0.1;
    }
    let b = energy.loss(&translation).unwrap();
    assert!(b.loss.abs() < 1e-10);
    assert!(math::norm2(&b.grad_u) < 1e-10);
}

#[test]
fn neohookean_loss_gradient_is_fem_residual_and_matches_fd() {
    let (mesh, _) = beam(2, 2, -0.05);
    let material = MaterialModel::NeoHookean(ElasticParams::constant(80.0, 0.3));
    let energy = NeoHookeanEnergy::new(mesh.clone(), material.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n_dofs = 2 * mesh.n_nodes();
    let u: Vec<f64> = (0..n_dofs).map(|_| 0.02 * (2.0 * runif(&mut rng) - 1.0)).collect();
    let b = energy.loss(&u).unwrap();
    // identity with the fem residual route
    let f_int = internal_force_neohookean(&mesh, &material, &u).unwrap();
    for (i, g) in b.grad_u.iter().enumerate() {
        let expect = f_int[i] - energy.external_force()[i];
        assert!((g - expect).abs() <= 1e-10);
    }
    // dual oracle: finite differences of the loss
    let h = 1e-6;
    for d in (0..n_dofs).step_by(3) {
        let mut up = u.clone();
        up[d] += h;
        let lp = energy.loss(&up).unwrap().loss;
        up[d] -= 2.0 * h;
        let lm = energy.loss(&up).unwrap().loss;
        let fd = (lp - lm) / (2.0 * h);
        let rel = (b.grad_u[d] - fd).abs() / b.grad_u[d].abs().max(fd.abs()).max(1e-6);
        assert!(rel < 1e-6, "dof {d}: grad {} vs fd {}", b.grad_u[d], fd);
    }
}

fn poisson_mesh(nx: usize) -> Mesh {
    let sm = build_structured_mesh(nx, nx, ElementType::Q4, &CornerMap::unit_square()).unwrap();
    let mut mesh = sm.mesh.clone();
    let mut seen = vec![false; mesh.n_nodes()];
    for side in Side::ALL {
        for &n in sm.side_nodes(side) {
            if !seen[n] {
                seen[n] = true;
                mesh.dirichlet.push(DirichletBc { node: n, ux: Some(0.0), uy: None });
            }
        }
    }
    mesh
}

#[test]
fn poisson_variational_gradient_vanishes_at_solution() {
    let mesh = poisson_mesh(6);
    let source = |p: [f64; 2]| {
        2.0 * core::f64::consts::PI * core::f64::consts::PI
            * math::sin(core::f64::consts::PI * p[0])
            * math::sin(core::f64::consts::PI * p[1])
    };
    let loss = PoissonVariational::new(mesh.clone(), MaterialField::Constant(1.0), &source).unwrap();
    let sys = apply_dirichlet(
        loss.stiffness(),
        loss.load(),
        &dirichlet_constraints(&mesh, 1).unwrap(),
    )
    .unwrap();
    let t = sys.reconstruct(&dense_direct_solve(&sys.reduced_k, &sys.reduced_f).unwrap());
    let b = loss.loss(&t).unwrap();
    let g_free = sys.restrict(&b.grad_u);
    assert!(math::norm2(&g_free) < 1e-10);
}

#[test]
fn poisson_losses_vanish_on_harmonic_linear_field() {
    // T = x is harmonic; with k = 1 and f = 0 both interior terms vanish
    let mesh = poisson_mesh(4);
    let t: Vec<f64> = mesh.nodes.iter().map(|p| p[0]).collect();

    let vloss = PoissonVariational::new(mesh.clone(), MaterialField::Constant(1.0), &|_| 0.0).unwrap();
    let b = vloss.loss(&t).unwrap();
    // interior gradient (K T) vanishes on interior nodes for the linear field
    let constraints = dirichlet_constraints(&mesh, 1).unwrap();
    let sys = apply_dirichlet(vloss.stiffness(), vloss.load(), &constraints).unwrap();
    let g_free = sys.restrict(&b.grad_u);
    assert!(math::norm2(&g_free) < 1e-12);

    let strong =
        PoissonStrong::new(mesh.clone(), MaterialField::Constant(1.0), alloc::boxed::Box::new(|_| 0.0))
            .unwrap();
    let (interior, _, _) = strong.terms(&t).unwrap();
    assert!(interior < 1e-24, "strong interior {interior}");
}

#[test]
fn poisson_strong_t3_vanishes_on_linear_field() {
    let sm = build_structured_mesh(5, 4, ElementType::T3, &CornerMap::unit_square()).unwrap();
    let mesh = sm.mesh.clone();
    let t: Vec<f64> = mesh.nodes.iter().map(|p| 2.0 * p[0] - 0.5 * p[1]).collect();
    let strong =
        PoissonStrong::new(mesh, MaterialField::Constant(1.0), alloc::boxed::Box::new(|_| 0.0))
            .unwrap();
    let (interior, _, _) = strong.terms(&t).unwrap();
    assert!(interior < 1e-24, "strong interior {interior}");
}

#[test]
fn poisson_dirichlet_penalty_vanishes_when_matching() {
    let mesh = poisson_mesh(4);
    let strong =
        PoissonStrong::new(mesh.clone(), MaterialField::Constant(1.0), alloc::boxed::Box::new(|_| 0.0))
            .unwrap();
    // boundary values are 0, interior anything
    let t: Vec<f64> = mesh
        .nodes
        .iter()
        .map(|p| p[0] * (1.0 - p[0]) * p[1] * (1.0 - p[1]))
        .collect();
    let (_, dirichlet, _) = strong.terms(&t).unwrap();
    assert_eq!(dirichlet, 0.0);
}

#[test]
fn poisson_strong_gradient_matches_finite_differences() {
    let mesh = poisson_mesh(3);
    let k_nodes: Vec<f64> = mesh.nodes.iter().map(|p| 1.0 + 0.3 * p[0] + 0.2 * p[1]).collect();
    let strong = PoissonStrong::new(
        mesh.clone(),
        MaterialField::Nodal(k_nodes),
        alloc::boxed::Box::new(|p: [f64; 2]| p[0] - p[1]),
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = mesh.n_nodes();
    let t: Vec<f64> = (0..n).map(|_| 2.0 * runif(&mut rng) - 1.0).collect();
    let b = strong.loss(&t).unwrap();
    let h = 1e-6;
    for d in 0..n {
        let mut tp = t.clone();
        tp[d] += h;
        let lp = strong.loss(&tp).unwrap().loss;
        tp[d] -= 2.0 * h;
        let lm = strong.loss(&tp).unwrap().loss;
        let fd = (lp - lm) / (2.0 * h);
        let rel = (b.grad_u[d] - fd).abs() / b.grad_u[d].abs().max(fd.abs()).max(1e-7);
        assert!(rel < 1e-6, "node {d}: grad {} vs fd {}", b.grad_u[d], fd);
    }
}

#[test]
fn poisson_strong_interior_shrinks_under_refinement() {
    // manufactured T = sin(pi x) sin(pi y), interpolated at nodes; the
    // interior surrogate must decay roughly like h^2 (factor ~16 per 2x
    // refinement in the squared residual; allow a generous margin)
    let pi = core::f64::consts::PI;
    let exact = move |p: [f64; 2]| math::sin(pi * p[0]) * math::sin(pi * p[1]);
    let source = move |p: [f64; 2]| 2.0 * pi * pi * math::sin(pi * p[0]) * math::sin(pi * p[1]);
    let mut prev = f64::INFINITY;
    for nx in [8usize, 16, 32] {
        let sm = build_structured_mesh(nx, nx, ElementType::Q4, &CornerMap::unit_square()).unwrap();
        let mesh = sm.mesh.clone();
        let t: Vec<f64> = mesh.nodes.iter().map(|p| exact(*p)).collect();
        let strong = PoissonStrong::new(
            mesh,
            MaterialField::Constant(1.0),
            alloc::boxed::Box::new(source),
        )
        .unwrap();
        let (interior, _, _) = strong.terms(&t).unwrap();
        if prev.is_finite() {
            assert!(interior < prev / 6.0, "interior {interior} vs prev {prev}");
        }
        prev = interior;
    }
}

#[test]
fn gradient_descent_on_nodal_field_reaches_fem_solution() {
    // 4x4 unit-square plate (kinder conditioning than the slender beam):
    // plain gradient descent on the nodal field, bypassing any network
    let sm = build_structured_mesh(4, 4, ElementType::Q4, &CornerMap::unit_square()).unwrap();
    let mut mesh = sm.mesh.clone();
    for &n in sm.side_nodes(Side::Left) {
        mesh.dirichlet.push(DirichletBc { node: n, ux: Some(0.0), uy: Some(0.0) });
    }
    for (edge, _) in sm.side_edges(Side::Right) {
        mesh.neumann.push(NeumannBc { edge: edge.clone(), tx: 1.0, ty: 0.3 });
    }
    let material = MaterialModel::PlaneStress(ElasticParams::constant(100.0, 0.25));
    let energy = LinearEnergy::new(mesh.clone(), material).unwrap();
    let constraints = dirichlet_constraints(&mesh, 2).unwrap();
    let sys = apply_dirichlet(energy.stiffness(), energy.load(), &constraints).unwrap();
    let exact = sys.reconstruct(&dense_direct_solve(&sys.reduced_k, &sys.reduced_f).unwrap());
    let lambda_max = spectral_radius(&sys.reduced_k.to_dense(), sys.n_free(), 200);
    let lr = 1.8 / lambda_max;
    let mut u = vec![0.0; 2 * mesh.n_nodes()];
    for _ in 0..30_000 {
        let b = energy.loss(&u).unwrap();
        for &dof in sys.free_dofs() {
            u[dof] -= lr * b.grad_u[dof];
        }
    }
    let err: Vec<f64> = u.iter().zip(&exact).map(|(a, b)| a - b).collect();
    let rel = math::norm2(&err) / math::norm2(&exact);
    assert!(rel < 0.05, "gradient descent rel err {rel}");
}

#[test]
fn backprop_through_loss_chains_zero_gradient_to_zero() {
    let (mesh, ansatz) = beam(2, 2, -0.05);
    let config = TransolverConfig {
        num_layers: 1,
        num_tokens: 4,
        channels: 8,
        heads: 2,
        mlp_ratio: 2,
        in_features: 2,
        out_features: 2,
    };
    let store = register_params(&config, 31).unwrap();
    let feats = Tensor::matrix(
        mesh.n_nodes(),
        2,
        mesh.nodes.iter().flat_map(|p| [p[0] / 4.0, p[1]]).collect(),
    )
    .unwrap();
    let run = forward(&feats, &store, &config).unwrap();
    let bundle = LossBundle { loss: 0.0, grad_u: vec![0.0; 2 * mesh.n_nodes()] };
    let g = backprop_through_loss(&run, &ansatz, &bundle, &store).unwrap();
    assert!(g.iter().all(|&v| v == 0.0));
}

#[test]
fn backprop_through_loss_matches_parameter_fd() {
    // tiny end-to-end: linear energy loss through the ansatz and operator
    let (mesh, ansatz) = beam(2, 1, -0.1);
    let material = MaterialModel::PlaneStress(ElasticParams::constant(100.0, 0.25));
    let energy = LinearEnergy::new(mesh.clone(), material).unwrap();
    let config = TransolverConfig {
        num_layers: 1,
        num_tokens: 2,
        channels: 4,
        heads: 1,
        mlp_ratio: 1,
        in_features: 2,
        out_features: 2,
    };
    let mut store = register_params(&config, 41).unwrap();
    let feats = Tensor::matrix(
        mesh.n_nodes(),
        2,
        mesh.nodes.iter().flat_map(|p| [p[0] / 4.0, p[1]]).collect(),
    )
    .unwrap();
    let loss_of = |store: &crate::tensor::ParamStore| -> f64 {
        let run = forward(&feats, store, &config).unwrap();
        let u = ansatz.apply(run.output()).unwrap();
        energy.loss(&u).unwrap().loss
    };
    let run = forward(&feats, &store, &config).unwrap();
    let u = ansatz.apply(run.output()).unwrap();
    let bundle = energy.loss(&u).unwrap();
    let grad = backprop_through_loss(&run, &ansatz, &bundle, &store).unwrap();
    let gmax = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for i in 0..store.len() {
        let orig = store.flat()[i];
        store.flat_mut()[i] = orig + h;
        let lp = loss_of(&store);
        store.flat_mut()[i] = orig - h;
        let lm = loss_of(&store);
        store.flat_mut()[i] = orig;
        let fd = (lp - lm) / (2.0 * h);
        // floor relative errors at the gradient scale: entries far below
        // 1e-4 * gmax sit under the FD roundoff noise
        let rel = (grad[i] - fd).abs() / grad[i].abs().max(fd.abs()).max(1e-4 * gmax);
        worst = worst.max(rel);
    }
    assert!(worst < 1e-4, "worst rel {worst}");
}
