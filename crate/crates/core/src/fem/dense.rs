//! Dense direct solves and small-matrix spectral utilities; the oracle side
//! of the dual solver routes.

use super::SparseMatrixCsr;
use crate::error::{Error, Result};
use crate::math;
use alloc::vec;
use alloc::vec::Vec;

/// LU with partial pivoting, in place; solves A x = b for one right side.
pub fn lu_solve(a: &mut [f64], b: &mut [f64], n: usize) -> Result<()> {
    debug_assert_eq!(a.len(), n * n);
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let mut piv = k;
        let mut best = a[perm[k] * n + k].abs();
        for r in (k + 1)..n {
            let cand = a[perm[r] * n + k].abs();
            if cand > best {
                best = cand;
                piv = r;
            }
        }
        if best == 0.0 {
            return Err(Error::SingularMatrix);
        }
        perm.swap(k, piv);
        let pk = perm[k];
        let diag = a[pk * n + k];
        for r in (k + 1)..n {
            let pr = perm[r];
            let factor = a[pr * n + k] / diag;
            a[pr * n + k] = factor;
            for c in (k + 1)..n {
                a[pr * n + c] -= factor * a[pk * n + c];
            }
        }
    }
    // forward substitution on the permuted rows
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut acc = b[perm[i]];
        for j in 0..i {
            acc -= a[perm[i] * n + j] * y[j];
        }
        y[i] = acc;
    }
    // back substitution
    for i in (0..n).rev() {
        let mut acc = y[i];
        for j in (i + 1)..n {
            acc -= a[perm[i] * n + j] * b[j];
        }
        b[i] = acc / a[perm[i] * n + i];
    }
    Ok(())
}

/// Direct solve of a sparse system through a dense factorization. Intended
/// for oracle checks and small systems (`n` up to a configured dense limit).
pub fn dense_direct_solve(k: &SparseMatrixCsr, f: &[f64]) -> Result<Vec<f64>> {
    let n = k.n();
    if f.len() != n {
        return Err(Error::Invalid(alloc::format!("rhs length {} for n = {n}", f.len())));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut a = k.to_dense();
    let mut x = f.to_vec();
    lu_solve(&mut a, &mut x, n)?;
    Ok(x)
}

/// Cholesky test for symmetric positive definiteness (consumes a dense copy).
pub fn is_spd(dense: &[f64], n: usize) -> bool {
    let mut a = dense.to_vec();
    for k in 0..n {
        let mut d = a[k * n + k];
        for j in 0..k {
            d -= a[k * n + j] * a[k * n + j];
        }
        if d <= 0.0 {
            return false;
        }
        let d = math::sqrt(d);
        a[k * n + k] = d;
        for i in (k + 1)..n {
            let mut v = a[i * n + k];
            for j in 0..k {
                v -= a[i * n + j] * a[k * n + j];
            }
            a[i * n + k] = v / d;
        }
    }
    true
}

/// Spectral radius estimate by power iteration on a dense matrix.
pub fn spectral_radius(dense: &[f64], n: usize, iters: usize) -> f64 {
    let mut x = vec![0.0; n];
    // fixed deterministic start with components in every direction
    for (i, v) in x.iter_mut().enumerate() {
        *v = 1.0 + 0.37 * math::sin(i as f64 + 0.5);
    }
    let mut lambda = 0.0;
    for _ in 0..iters {
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                acc += dense[i * n + j] * x[j];
            }
            y[i] = acc;
        }
        let norm = math::norm2(&y);
        if norm == 0.0 {
            return 0.0;
        }
        lambda = norm;
        for (xv, yv) in x.iter_mut().zip(&y) {
            *xv = yv / norm;
        }
    }
    lambda
}
