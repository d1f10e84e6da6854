use super::*;
use crate::error::Error;
use alloc::vec;
use alloc::vec::Vec;

fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

#[test]
fn matmul_identity() {
    let mut tape = Tape::new();
    let a = tape.input(Tensor::matrix(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap());
    let b = tape.input(Tensor::matrix(2, 1, vec![3.0, 4.0]).unwrap());
    let c = tape.matmul(a, b).unwrap();
    assert_eq!(tape.value(c).data(), &[3.0, 4.0]);
}

#[test]
fn matmul_shape_error_names_op() {
    let mut tape = Tape::new();
    let a = tape.input(Tensor::matrix(2, 3, vec![0.0; 6]).unwrap());
    let b = tape.input(Tensor::matrix(2, 2, vec![0.0; 4]).unwrap());
    match tape.matmul(a, b) {
        Err(Error::ShapeMismatch { op, detail }) => {
            assert_eq!(op, "matmul");
            assert!(detail.contains("[2, 3]"));
        }
        other => panic!("expected shape mismatch, got {other:?}"),
    }
}

#[test]
fn softmax_symmetry() {
    let mut tape = Tape::new();
    let a = tape.input(Tensor::matrix(1, 2, vec![0.0, 0.0]).unwrap());
    let s = tape.softmax_lastdim(a);
    assert_eq!(tape.value(s).data(), &[0.5, 0.5]);
}

#[test]
fn softmax_rows_sum_to_one() {
    let mut tape = Tape::new();
    let a = tape.input(
        Tensor::matrix(3, 4, vec![1.0, -2.0, 0.5, 3.0, -40.0, 12.0, 0.0, 1e-3, 7.0, 7.0, 7.0, 7.0])
            .unwrap(),
    );
    let s = tape.softmax_lastdim(a);
    let v = tape.value(s);
    for r in 0..3 {
        let sum: f64 = v.row(r).iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!(v.row(r).iter().all(|&x| x > 0.0 && x < 1.0));
    }
}

#[test]
fn layernorm_hand_example() {
    // row [2,4]: mean 3, population std 1 -> [-1, 1] with unit gain, zero bias
    let mut tape = Tape::new();
    let a = tape.input(Tensor::matrix(1, 2, vec![2.0, 4.0]).unwrap());
    let g = tape.input(Tensor::matrix(1, 2, vec![1.0, 1.0]).unwrap());
    let b = tape.input(Tensor::matrix(1, 2, vec![0.0, 0.0]).unwrap());
    let y = tape.layernorm_lastdim(a, g, b).unwrap();
    let v = tape.value(y);
    assert!((v.data()[0] + 1.0).abs() < 1e-10);
    assert!((v.data()[1] - 1.0).abs() < 1e-10);
}

#[test]
fn layernorm_row_stats_invariant() {
    let mut tape = Tape::new();
    let a = tape.input(Tensor::matrix(2, 5, vec![0.3, -1.2, 4.0, 2.2, -0.7, 9.0, 8.0, 7.5, 10.0, 8.25]).unwrap());
    let g = tape.input(Tensor::filled(&[1, 5], 1.0));
    let b = tape.input(Tensor::zeros(&[1, 5]));
    let y = tape.layernorm_lastdim(a, g, b).unwrap();
    let v = tape.value(y);
    for r in 0..2 {
        let mean: f64 = v.row(r).iter().sum::<f64>() / 5.0;
        let var: f64 = v.row(r).iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 5.0;
        assert!(mean.abs() < 1e-10);
        assert!((var - 1.0).abs() < 1e-10);
    }
}

#[test]
fn backward_sum_is_ones() {
    let mut store = ParamStore::new(0);
    let slot = store.add_const("theta", &[2, 3], 1.5);
    let mut tape = Tape::new();
    let p = tape.param(&store, slot);
    let loss = tape.sum(p);
    let g = tape.backward(loss, &store).unwrap();
    assert_eq!(g, vec![1.0; 6]);
}

#[test]
fn backward_quadratic() {
    let mut store = ParamStore::new(0);
    let slot = store.add_const("theta", &[1, 2], 0.0);
    store.flat_mut().copy_from_slice(&[1.0, 2.0]);
    let mut tape = Tape::new();
    let p = tape.param(&store, slot);
    let sq = tape.mul(p, p).unwrap();
    let loss = tape.sum(sq);
    let g = tape.backward(loss, &store).unwrap();
    assert_eq!(g, vec![2.0, 4.0]);
}

#[test]
fn backward_rejects_non_scalar() {
    let mut store = ParamStore::new(0);
    let slot = store.add_const("theta", &[2, 2], 1.0);
    let mut tape = Tape::new();
    let p = tape.param(&store, slot);
    assert!(matches!(tape.backward(p, &store), Err(Error::NotScalar { .. })));
}

#[test]
fn unreachable_params_get_zero_gradient() {
    let mut store = ParamStore::new(7);
    let a = store.add_uniform("a", &[2, 2], 2);
    let _b = store.add_uniform("b", &[3, 3], 3);
    let mut tape = Tape::new();
    let pa = tape.param(&store, a);
    let loss = tape.sum(pa);
    let g = tape.backward(loss, &store).unwrap();
    assert_eq!(&g[..4], &[1.0; 4]);
    assert_eq!(&g[4..], &[0.0; 9]);
}

/// Builds a composite graph exercising every op and returns the scalar loss.
fn composite_loss(store: &ParamStore, x: &Tensor) -> (Tape, NodeId) {
    let mut tape = Tape::new();
    let xin = tape.input(x.clone());
    let w1 = tape.param(store, store.slot("w1").unwrap());
    let b1 = tape.param(store, store.slot("b1").unwrap());
    let g1 = tape.param(store, store.slot("g1").unwrap());
    let be1 = tape.param(store, store.slot("be1").unwrap());
    let w2 = tape.param(store, store.slot("w2").unwrap());
    let h = tape.matmul(xin, w1).unwrap();
    let h = tape.add(h, b1).unwrap();
    let h = tape.gelu(h);
    let h = tape.layernorm_lastdim(h, g1, be1).unwrap();
    let m = tape.softmax_lastdim(h);
    let ones = tape.input(Tensor::filled(&[x.shape()[0], 1], 1.0));
    let mt = tape.transpose(m);
    let colsum = tape.matmul(mt, ones).unwrap();
    let z = tape.matmul(mt, h).unwrap();
    let z = tape.div_colvec(z, colsum).unwrap();
    let z2 = tape.matmul(z, w2).unwrap();
    let zs = tape.scale(z2, 0.75);
    let left = tape.slice_cols(zs, 0, 2).unwrap();
    let right = tape.slice_cols(zs, 2, zs_cols(&tape, zs)).unwrap();
    let cat = tape.concat_cols(&[right, left]).unwrap();
    let top = tape.slice_rows(cat, 0, 2).unwrap();
    let sq = tape.mul(top, top).unwrap();
    let s1 = tape.sum(sq);
    let m1 = tape.mean(cat);
    let loss = tape.add(s1, m1).unwrap();
    (tape, loss)
}

fn zs_cols(tape: &Tape, id: NodeId) -> usize {
    tape.value(id).cols()
}

#[test]
fn gradients_match_central_differences() {
    for seed in [1u64, 2, 3] {
        let mut store = ParamStore::new(seed);
        store.add_uniform("w1", &[4, 6], 4);
        store.add_uniform("b1", &[1, 6], 4);
        store.add_const("g1", &[1, 6], 1.0);
        store.add_const("be1", &[1, 6], 0.0);
        store.add_uniform("w2", &[6, 5], 6);
        assert!(store.len() <= 200);

        let mut xs = ParamStore::new(seed + 100);
        xs.add_uniform("x", &[5, 4], 1);
        let x = Tensor::matrix(5, 4, xs.flat().to_vec()).unwrap();

        let (tape, loss) = composite_loss(&store, &x);
        let grad = tape.backward(loss, &store).unwrap();

        let h = 1e-6;
        let mut max_rel: f64 = 0.0;
        for i in 0..store.len() {
            let orig = store.flat()[i];
            store.flat_mut()[i] = orig + h;
            let (t1, l1) = composite_loss(&store, &x);
            let fp = t1.value(l1).data()[0];
            store.flat_mut()[i] = orig - h;
            let (t2, l2) = composite_loss(&store, &x);
            let fm = t2.value(l2).data()[0];
            store.flat_mut()[i] = orig;
            let fd = (fp - fm) / (2.0 * h);
            max_rel = max_rel.max(rel_err(grad[i], fd, 1e-6));
        }
        assert!(max_rel < 1e-4, "seed {seed}: max rel err {max_rel:e}");
    }
}

#[test]
fn backward_from_seeds_chain_rule() {
    // d(sum(W x ∘ s)) where seed plays the role of an external loss gradient
    let mut store = ParamStore::new(11);
    let slot = store.add_uniform("w", &[3, 3], 3);
    let x = Tensor::matrix(3, 2, vec![0.4, -0.3, 1.0, 0.25, -0.5, 0.75]).unwrap();
    let mut tape = Tape::new();
    let w = tape.param(&store, slot);
    let xin = tape.input(x.clone());
    let y = tape.matmul(w, xin).unwrap();
    let seed = Tensor::matrix(3, 2, vec![1.0, 2.0, -1.0, 0.5, 0.0, 3.0]).unwrap();
    let g = tape.backward_from(y, seed.clone(), &store).unwrap();
    // dL/dW = seed * x^T
    for i in 0..3 {
        for j in 0..3 {
            let expect: f64 = (0..2).map(|c| seed.at(i, c) * x.at(j, c)).sum();
            assert!((g[i * 3 + j] - expect).abs() < 1e-14);
        }
    }
}

#[test]
fn adam_zero_gradient_is_identity() {
    let mut store = ParamStore::new(0);
    store.add_const("t", &[1, 3], 2.0);
    let before = store.flat().to_vec();
    let mut state = AdamState::new(store.len(), 0.002);
    adam_step(&mut store, &[0.0, 0.0, 0.0], &mut state).unwrap();
    assert_eq!(store.flat(), &before[..]);
    let (m, v) = state.moments();
    assert!(m.iter().all(|&x| x == 0.0) && v.iter().all(|&x| x == 0.0));
}

#[test]
fn adam_first_step_magnitude() {
    let mut store = ParamStore::new(0);
    store.add_const("t", &[1, 1], 0.5);
    let mut state = AdamState::new(1, 0.002);
    adam_step(&mut store, &[1.0], &mut state).unwrap();
    // bias-corrected first step is lr / (1 + eps)
    assert!((store.flat()[0] - (0.5 - 0.002)).abs() < 1e-10);
    assert_eq!(state.step_count(), 1);
}

#[test]
fn adam_descends_against_constant_gradient() {
    let mut store = ParamStore::new(0);
    store.add_const("t", &[1, 1], 0.0);
    let mut state = AdamState::new(1, 0.01);
    for _ in 0..50 {
        adam_step(&mut store, &[-2.5], &mut state).unwrap();
    }
    assert!(store.flat()[0] > 0.0);
}

#[test]
fn adam_rejects_non_finite_and_names_param() {
    let mut store = ParamStore::new(0);
    store.add_const("alpha", &[1, 2], 0.0);
    store.add_const("beta", &[1, 2], 0.0);
    let mut state = AdamState::new(4, 0.002);
    match adam_step(&mut store, &[0.0, 0.0, f64::NAN, 0.0], &mut state) {
        Err(Error::NonFinite { what }) => assert_eq!(what, "beta"),
        other => panic!("expected NonFinite, got {other:?}"),
    }
}

#[test]
fn forward_backward_deterministic_by_seed() {
    let run = || {
        let mut store = ParamStore::new(42);
        store.add_uniform("w1", &[4, 6], 4);
        store.add_uniform("b1", &[1, 6], 4);
        store.add_const("g1", &[1, 6], 1.0);
        store.add_const("be1", &[1, 6], 0.0);
        store.add_uniform("w2", &[6, 5], 6);
        let x = Tensor::matrix(5, 4, (0..20).map(|i| (i as f64) * 0.1 - 1.0).collect()).unwrap();
        let (tape, loss) = composite_loss(&store, &x);
        let l = tape.value(loss).data()[0];
        let g = tape.backward(loss, &store).unwrap();
        (l.to_bits(), g.iter().map(|v| v.to_bits()).collect::<Vec<_>>())
    };
    assert_eq!(run(), run());
}

#[test]
fn param_store_roundtrip_is_bit_exact() {
    let mut store = ParamStore::new(9);
    store.add_uniform("a", &[3, 7], 3);
    store.add_uniform("b", &[7, 2], 7);
    let saved: Vec<f64> = store.flat().to_vec();
    let mut other = ParamStore::new(1234);
    other.add_uniform("a", &[3, 7], 3);
    other.add_uniform("b", &[7, 2], 7);
    other.set_flat(&saved).unwrap();
    assert_eq!(
        store.flat().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        other.flat().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );
    let total: usize = store.entries().iter().map(|e| e.shape.iter().product::<usize>()).sum();
    assert_eq!(total, store.len());
}

#[test]
fn primitive_forward_dispatch() {
    let mut tape = Tape::new();
    let a = tape.input(Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap());
    let b = tape.input(Tensor::matrix(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap());
    let c = primitive_forward(&mut tape, OpKind::Matmul, &[a, b]).unwrap();
    assert_eq!(tape.value(c).data(), &[1.0, 2.0, 3.0, 4.0]);
    let s = primitive_forward(&mut tape, OpKind::Scale(2.0), &[c]).unwrap();
    assert_eq!(tape.value(s).data(), &[2.0, 4.0, 6.0, 8.0]);
    assert!(primitive_forward(&mut tape, OpKind::Sum, &[a, b]).is_err());
}
