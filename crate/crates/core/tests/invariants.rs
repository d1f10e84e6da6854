//! Property tests over the numerical kernels.

use pfem_core::fem::SparseMatrixCsr;
use pfem_core::mesh::{shape_gradients, shape_values, ElementType};
use pfem_core::tensor::{Tape, Tensor};
use proptest::prelude::*;

fn finite_vals(n: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-50.0f64..50.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    // logit spreads past ~38 nats saturate to exactly 1.0 in f64; attention
    // logits stay far below that, so the strict-(0,1) property is tested on
    // a matching range
    fn softmax_rows_are_distributions(vals in proptest::collection::vec(-15.0f64..15.0, 24)) {
        let mut tape = Tape::new();
        let x = tape.input(Tensor::matrix(4, 6, vals).unwrap());
        let s = tape.softmax_lastdim(x);
        let v = tape.value(s);
        for r in 0..4 {
            let sum: f64 = v.row(r).iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            prop_assert!(v.row(r).iter().all(|&x| x > 0.0 && x < 1.0));
        }
    }

    #[test]
    fn layernorm_rows_are_standardized(vals in finite_vals(30)) {
        let mut tape = Tape::new();
        let x = tape.input(Tensor::matrix(5, 6, vals).unwrap());
        let g = tape.input(Tensor::filled(&[1, 6], 1.0));
        let b = tape.input(Tensor::zeros(&[1, 6]));
        let y = tape.layernorm_lastdim(x, g, b).unwrap();
        let v = tape.value(y);
        for r in 0..5 {
            let mean: f64 = v.row(r).iter().sum::<f64>() / 6.0;
            let var: f64 = v.row(r).iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 6.0;
            prop_assert!(mean.abs() < 1e-10);
            // constant rows normalize to zero variance, anything else to one
            prop_assert!(var < 1e-9 || (var - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn partition_of_unity_random_points(a in 0.0f64..1.0, b in 0.0f64..1.0) {
        for et in [ElementType::T3, ElementType::Q4, ElementType::Q8] {
            let p = match et {
                ElementType::T3 => {
                    let (mut s, mut t) = (a, b);
                    if s + t > 1.0 { s = 1.0 - s; t = 1.0 - t; }
                    [s, t]
                }
                _ => [2.0 * a - 1.0, 2.0 * b - 1.0],
            };
            let (n, count) = shape_values(et, p);
            let sum: f64 = n[..count].iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-13);
            let (g, _) = shape_gradients(et, p);
            for axis in 0..2 {
                let gs: f64 = g[..count].iter().map(|v| v[axis]).sum();
                prop_assert!(gs.abs() < 1e-13);
            }
        }
    }

    #[test]
    fn csr_matvec_matches_dense(vals in finite_vals(25), x in finite_vals(5)) {
        let mut triplets = Vec::new();
        for i in 0..5 {
            for j in 0..5 {
                // drop some entries to vary the sparsity pattern
                if (i + 2 * j) % 3 != 0 {
                    triplets.push((i, j, vals[i * 5 + j]));
                }
            }
        }
        let k = SparseMatrixCsr::from_triplets(5, &triplets).unwrap();
        let y = k.matvec_alloc(&x);
        let d = k.to_dense();
        for i in 0..5 {
            let want: f64 = (0..5).map(|j| d[i * 5 + j] * x[j]).sum();
            prop_assert!((y[i] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn grf_values_respect_clip(seed in 0u64..500) {
        let spec = pfem_core::grf::GrfSpec {
            dimension: 2, modes: 3, alpha: 1.5, mean: 100.0, amplitude: 80.0, clip: [50.0, 150.0],
        };
        let s = pfem_core::grf::sample(&spec, seed).unwrap();
        for p in [[0.0, 0.0], [0.25, 0.75], [1.0, 0.5], [0.9, 0.9]] {
            let v = s.evaluate(p);
            prop_assert!((50.0..=150.0).contains(&v));
        }
    }
}
