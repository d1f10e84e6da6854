//! Iteration-bound diagnostic on a contractive stationary iteration:
//! e^(k) = B^k e^(0), with the bound k <= (m ln10 + ln||e0||) / R(B) for
//! tol = 10^-m, and the prediction that a 100x better initial guess saves
//! about 2 ln10 / R(B) iterations regardless of tolerance.

use crate::error::{PfemError, Result};
use pfem_core::fem::spectral_radius;
use pfem_core::math;
use serde::{Deserialize, Serialize};

#[derive(Debug, Serialize, Deserialize)]
pub struct BoundRow {
    pub tol: f64,
    pub e0_scale: f64,
    pub observed: usize,
    pub bound: f64,
    /// Bound checks apply in the asymptotic regime (observed >= 10).
    pub asymptotic: bool,
    pub ok: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SavingsRow {
    pub tol: f64,
    pub observed_savings: isize,
    pub predicted: f64,
    pub within_20pct: bool,
    /// Relative savings (saved / zero-scale iterations), which shrinks as
    /// the tolerance tightens.
    pub relative_savings: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ConvergenceDiagnostic {
    pub n: usize,
    pub rho: f64,
    pub rate: f64,
    pub rows: Vec<BoundRow>,
    pub savings: Vec<SavingsRow>,
    /// Relative savings decrease monotonically as m grows.
    pub diminishing_relative_savings: bool,
}

/// Jacobi iteration matrix for the n-point 1D Poisson system
/// tridiag(-1, 2, -1): B = I - D^-1 K = tridiag(1/2, 0, 1/2).
fn jacobi_matrix(n: usize) -> Vec<f64> {
    let mut b = vec![0.0; n * n];
    for i in 0..n {
        if i > 0 {
            b[i * n + i - 1] = 0.5;
        }
        if i + 1 < n {
            b[i * n + i + 1] = 0.5;
        }
    }
    b
}

fn apply(b: &[f64], x: &[f64], n: usize) -> Vec<f64> {
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut acc = 0.0;
        for j in 0..n {
            acc += b[i * n + j] * x[j];
        }
        y[i] = acc;
    }
    y
}

/// Iterations of e <- B e until ||e|| < tol.
fn iterations_to(b: &[f64], e0: &[f64], n: usize, tol: f64, cap: usize) -> usize {
    let mut e = e0.to_vec();
    let mut k = 0;
    while math::norm2(&e) >= tol && k < cap {
        e = apply(b, &e, n);
        k += 1;
    }
    k
}

pub fn convergence_bound_check(n: usize, seed: u64) -> Result<ConvergenceDiagnostic> {
    let b = jacobi_matrix(n);
    let rho = spectral_radius(&b, n, 4000);
    if rho >= 1.0 {
        return Err(PfemError::Core(pfem_core::Error::NotContractive { rho }));
    }
    let rate = -math::ln(rho);

    // fixed random direction with components across the spectrum
    use rand_chacha::ChaCha8Rng;
    use rand_core::{RngCore, SeedableRng};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dir: Vec<f64> = (0..n)
        .map(|_| (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64) - 0.5)
        .collect();
    let norm = math::norm2(&dir);
    for v in &mut dir {
        *v /= norm;
    }

    let scales = [10.0, 0.1, 0.01];
    let tols: Vec<f64> = (2..=8).map(|m| math::pow(10.0, -(m as f64))).collect();
    let cap = 200_000;

    let mut rows = Vec::new();
    for &scale in &scales {
        let e0: Vec<f64> = dir.iter().map(|v| v * scale).collect();
        let e0_norm = math::norm2(&e0);
        for &tol in &tols {
            let observed = iterations_to(&b, &e0, n, tol, cap);
            let m = -math::ln(tol) / math::ln(10.0);
            let bound = (m * math::ln(10.0) + math::ln(e0_norm)) / rate;
            let asymptotic = observed >= 10;
            let ok = !asymptotic || (observed as f64) <= bound + 1e-9;
            rows.push(BoundRow { tol, e0_scale: scale, observed, bound, asymptotic, ok });
        }
    }

    // savings from a 100x better guess: scales 10 -> 0.1
    let mut savings = Vec::new();
    let mut prev_rel = f64::INFINITY;
    let mut diminishing = true;
    for &tol in &tols {
        let e_big: Vec<f64> = dir.iter().map(|v| v * 10.0).collect();
        let e_small: Vec<f64> = dir.iter().map(|v| v * 0.1).collect();
        let k_big = iterations_to(&b, &e_big, n, tol, cap);
        let k_small = iterations_to(&b, &e_small, n, tol, cap);
        let observed = k_big as isize - k_small as isize;
        let predicted = 2.0 * math::ln(10.0) / rate;
        let within = (observed as f64 - predicted).abs() <= 0.2 * predicted;
        let relative = if k_big > 0 { observed as f64 / k_big as f64 } else { 0.0 };
        // only judge the trend once both runs are in the asymptotic regime
        if k_small >= 10 {
            if relative > prev_rel + 1e-12 {
                diminishing = false;
            }
            prev_rel = relative;
        }
        savings.push(SavingsRow {
            tol,
            observed_savings: observed,
            predicted,
            within_20pct: within,
            relative_savings: relative,
        });
    }

    Ok(ConvergenceDiagnostic {
        n,
        rho,
        rate,
        rows,
        savings,
        diminishing_relative_savings: diminishing,
    })
}
