//! Patch test for the pretraining stage: train on a single sample with the
//! physics loss only and require the prediction to reach a known reference.
//! Passing is a necessary condition for an architecture to be worth training
//! at scale; the recorded steps-to-convergence N gives the N x M budget
//! heuristic for M-sample datasets.

use super::dataset::sample_id;
use super::evaluate::{predict_instance, relative_error};
use super::references::solve_reference;
use super::train::{LossObject, OperatorSection};
use crate::error::{PfemError, Result};
use crate::io::write_json;
use crate::problems::{draw_sample, instantiate, ProblemSpec};
use pfem_core::operator::{forward, register_params};
use pfem_core::physloss::backprop_through_loss;
use pfem_core::tensor::{adam_step, AdamState};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatchConfig {
    pub steps: usize,
    /// Relative-error threshold for passing (0.05 unless overridden).
    pub threshold: f64,
    pub lr: f64,
    pub lr_decay: f64,
    pub decay_every: u64,
    pub eval_every: usize,
    pub seed: u64,
    pub operator: OperatorSection,
}

impl Default for PatchConfig {
    fn default() -> Self {
        PatchConfig {
            steps: 5000,
            threshold: 0.05,
            lr: 0.002,
            lr_decay: 0.9,
            decay_every: 1000,
            eval_every: 50,
            seed: 0,
            operator: OperatorSection { num_layers: 2, num_tokens: 8, channels: 32, heads: 4, mlp_ratio: 2 },
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PatchReport {
    pub passed: bool,
    pub steps_run: usize,
    pub steps_to_threshold: Option<usize>,
    pub threshold: f64,
    pub final_error: f64,
    pub best_error: f64,
    /// Trailing-window means of the loss are non-increasing.
    pub loss_monotone_trailing: bool,
    /// ||dL/dU|| reduction factor from the first step to the last.
    pub grad_drop: f64,
    pub errors: Vec<(usize, f64)>,
    pub skipped_inversions: u64,
}

/// Run the patch test for a problem spec (one sample, physics loss only).
pub fn patch_test(spec: &ProblemSpec, cfg: &PatchConfig, out: Option<&Path>) -> Result<PatchReport> {
    spec.validate()?;
    let sm = spec.base_mesh()?;
    let sample = draw_sample(spec, &sm, "inline", 0)?;
    let inst = instantiate(spec, &sm.mesh, &sample)?;
    let loss_obj = LossObject::for_instance(&inst)?;
    let (ref_u, ref_report) = solve_reference(&inst)?;
    if !ref_report.converged {
        return Err(PfemError::Numerical(format!(
            "reference solve for the patch sample did not converge (residual {:.3e})",
            ref_report.residual_history.last().copied().unwrap_or(f64::NAN)
        )));
    }

    let config = cfg.operator.bind(spec.in_features(), spec.out_features());
    config.validate().map_err(PfemError::Core)?;
    let mut store = register_params(&config, cfg.seed)?;
    let mut adam = AdamState::new(store.len(), cfg.lr);

    let mut losses = Vec::with_capacity(cfg.steps);
    let mut errors: Vec<(usize, f64)> = Vec::new();
    let mut steps_to_threshold = None;
    let mut best_error = f64::INFINITY;
    let mut grad0 = None;
    let mut grad_last = 0.0;
    let mut skipped = 0u64;

    for step in 0..cfg.steps {
        adam.lr = cfg.lr * cfg.lr_decay.powi((step as u64 / cfg.decay_every.max(1)) as i32);
        let run = forward(&inst.features, &store, &config).map_err(PfemError::Core)?;
        let u = inst.ansatz.apply(run.output()).map_err(PfemError::Core)?;
        let bundle = match loss_obj.loss(&u) {
            Ok(b) => b,
            Err(pfem_core::Error::ElementInversion { .. }) => {
                skipped += 1;
                continue;
            }
            Err(e) => return Err(PfemError::Core(e)),
        };
        let gnorm = pfem_core::math::norm2(&bundle.grad_u);
        if grad0.is_none() {
            grad0 = Some(gnorm);
        }
        grad_last = gnorm;
        losses.push(bundle.loss);
        let grads =
            backprop_through_loss(&run, &inst.ansatz, &bundle, &store).map_err(PfemError::Core)?;
        adam_step(&mut store, &grads, &mut adam).map_err(PfemError::Core)?;

        if (step + 1) % cfg.eval_every == 0 || step + 1 == cfg.steps {
            let pred = predict_instance(&store, &config, &inst)?;
            let err = relative_error(&pred, &ref_u);
            errors.push((step + 1, err));
            best_error = best_error.min(err);
            if err <= cfg.threshold && steps_to_threshold.is_none() {
                steps_to_threshold = Some(step + 1);
            }
        }
    }

    // trailing-window monotonicity: split the loss history into 10 windows
    // and require the last 5 means to be non-increasing (2% jitter allowed)
    let loss_monotone_trailing = {
        let w = (losses.len() / 10).max(1);
        let means: Vec<f64> = losses
            .chunks(w)
            .map(|c| c.iter().sum::<f64>() / c.len() as f64)
            .collect();
        let tail = means.len().saturating_sub(5);
        means[tail..].windows(2).all(|p| p[1] <= p[0].abs() * 0.02 + p[0])
    };
    let final_error = errors.last().map_or(f64::INFINITY, |(_, e)| *e);
    let grad_drop = grad0.map_or(1.0, |g0| if grad_last > 0.0 { g0 / grad_last } else { f64::INFINITY });
    let report = PatchReport {
        passed: steps_to_threshold.is_some() && loss_monotone_trailing,
        steps_run: cfg.steps,
        steps_to_threshold,
        threshold: cfg.threshold,
        final_error,
        best_error,
        loss_monotone_trailing,
        grad_drop,
        errors,
        skipped_inversions: skipped,
    };
    if let Some(out) = out {
        std::fs::create_dir_all(out)?;
        write_json(&out.join("patch_report.json"), &report)?;
        let _ = sample_id(0);
    }
    Ok(report)
}
