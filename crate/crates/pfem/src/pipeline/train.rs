//! Physics-only training: per-sample energy losses, analytic nodal gradients
//! chained into the operator tape, Adam with stepwise learning-rate decay.
//! The training path never touches reference solutions; an optional held-out
//! dataset (with its own refs) is used for per-epoch error logging only.

use super::dataset::{load_dataset, load_references};
use super::evaluate::{predict_instance, relative_error};
use crate::error::{PfemError, Result};
use crate::io::{save_checkpoint, write_json};
use crate::problems::{instantiate, poisson_source, ProblemInstance, ProblemKind};
use pfem_core::operator::{forward, register_params, TransolverConfig};
use pfem_core::physloss::{
    backprop_through_loss, LinearEnergy, LossBundle, NeoHookeanEnergy, PoissonVariational,
};
use pfem_core::tensor::{adam_step, AdamState};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSection {
    pub num_layers: usize,
    pub num_tokens: usize,
    pub channels: usize,
    pub heads: usize,
    pub mlp_ratio: usize,
}

impl Default for OperatorSection {
    fn default() -> Self {
        OperatorSection { num_layers: 3, num_tokens: 16, channels: 64, heads: 4, mlp_ratio: 2 }
    }
}

impl OperatorSection {
    pub fn bind(&self, in_features: usize, out_features: usize) -> TransolverConfig {
        TransolverConfig {
            num_layers: self.num_layers,
            num_tokens: self.num_tokens,
            channels: self.channels,
            heads: self.heads,
            mlp_ratio: self.mlp_ratio,
            in_features,
            out_features,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub schema_version: u32,
    /// Initial learning rate (0.002 unless overridden).
    pub lr: f64,
    /// Multiplicative decay applied every `decay_every` steps (0.9 / 1000).
    pub lr_decay: f64,
    pub decay_every: u64,
    pub epochs: usize,
    /// Epochs between checkpoint snapshots (0 = final only).
    pub checkpoint_every: usize,
    pub seed: u64,
    pub operator: OperatorSection,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            schema_version: 1,
            lr: 0.002,
            lr_decay: 0.9,
            decay_every: 1000,
            epochs: 50,
            checkpoint_every: 0,
            seed: 0,
            operator: OperatorSection::default(),
        }
    }
}

/// Loss family bound to one sample, with cached assembled systems.
pub enum LossObject {
    Linear(LinearEnergy),
    NeoHookean(NeoHookeanEnergy),
    Poisson(PoissonVariational),
}

impl LossObject {
    pub fn for_instance(inst: &ProblemInstance) -> Result<Self> {
        Ok(match inst.kind {
            ProblemKind::LinearElastic => {
                LossObject::Linear(LinearEnergy::new(inst.mesh.clone(), inst.material.clone())?)
            }
            ProblemKind::NeoHookean => {
                LossObject::NeoHookean(NeoHookeanEnergy::new(inst.mesh.clone(), inst.material.clone()))
            }
            ProblemKind::Poisson => {
                let k = match &inst.material {
                    pfem_core::fem::MaterialModel::Poisson { k } => k.clone(),
                    _ => unreachable!("poisson kind carries a poisson material"),
                };
                LossObject::Poisson(PoissonVariational::new(
                    inst.mesh.clone(),
                    k,
                    &poisson_source(),
                )?)
            }
        })
    }

    pub fn loss(&self, u: &[f64]) -> pfem_core::Result<LossBundle> {
        match self {
            LossObject::Linear(l) => l.loss(u),
            LossObject::NeoHookean(l) => l.loss(u),
            LossObject::Poisson(l) => l.loss(u),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TrainSummary {
    pub steps: u64,
    pub skipped_inversions: u64,
    pub final_loss: f64,
    pub checkpoint: PathBuf,
    pub metrics: PathBuf,
    /// Audit flag: the training loop has no access to this dataset's refs.
    pub refs_read_by_training: bool,
    pub test_errors: Vec<(usize, f64)>,
}

/// Train on a dataset directory; returns the summary after writing the final
/// checkpoint, metrics CSV, and summary JSON under `out`.
pub fn train(
    data_dir: &Path,
    cfg: &TrainConfig,
    eval_dir: Option<&Path>,
    out: &Path,
) -> Result<TrainSummary> {
    std::fs::create_dir_all(out)?;
    let ds = load_dataset(data_dir)?;
    let config = cfg.operator.bind(ds.spec.in_features(), ds.spec.out_features());
    config.validate().map_err(PfemError::Core)?;

    let instances: Vec<ProblemInstance> = ds
        .samples
        .iter()
        .map(|s| instantiate(&ds.spec, &ds.base_mesh, s))
        .collect::<Result<_>>()?;
    let losses: Vec<LossObject> =
        instances.iter().map(LossObject::for_instance).collect::<Result<_>>()?;

    // held-out evaluation set (its refs live in its own directory)
    let eval_set = match eval_dir {
        Some(dir) => {
            let eds = load_dataset(dir)?;
            let refs = load_references(dir, &eds.ids)?;
            let insts: Vec<ProblemInstance> = eds
                .samples
                .iter()
                .map(|s| instantiate(&eds.spec, &eds.base_mesh, s))
                .collect::<Result<_>>()?;
            Some((insts, refs))
        }
        None => None,
    };

    let mut store = register_params(&config, cfg.seed)?;
    let mut adam = AdamState::new(store.len(), cfg.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5EED_5EED);
    let metrics_path = out.join("metrics.csv");
    let mut metrics = std::io::BufWriter::new(std::fs::File::create(&metrics_path)?);
    writeln!(metrics, "step,epoch,loss,lr,test_error")?;

    let mut step: u64 = 0;
    let mut skipped: u64 = 0;
    let mut final_loss = f64::NAN;
    let mut last_good: Vec<f64> = store.flat().to_vec();
    let mut test_errors: Vec<(usize, f64)> = Vec::new();
    let ckpt_path = out.join("checkpoint.bin");

    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..instances.len()).collect();
        for i in (1..order.len()).rev() {
            let j = (rng.next_u64() % (i as u64 + 1)) as usize;
            order.swap(i, j);
        }
        for &idx in &order {
            let inst = &instances[idx];
            adam.lr = cfg.lr * cfg.lr_decay.powi((step / cfg.decay_every.max(1)) as i32);
            let run = forward(&inst.features, &store, &config).map_err(PfemError::Core)?;
            let u = inst.ansatz.apply(run.output()).map_err(PfemError::Core)?;
            let bundle = match losses[idx].loss(&u) {
                Ok(b) => b,
                Err(pfem_core::Error::ElementInversion { .. }) => {
                    // log-barrier energy blows up on inverted trial states;
                    // skip the sample this step
                    skipped += 1;
                    step += 1;
                    continue;
                }
                Err(e) => return Err(PfemError::Core(e)),
            };
            if !bundle.loss.is_finite() {
                store.set_flat(&last_good).map_err(PfemError::Core)?;
                save_checkpoint(&ckpt_path, &store, &config)?;
                return Err(PfemError::Numerical(format!(
                    "non-finite loss at step {step}; last good checkpoint written to {}",
                    ckpt_path.display()
                )));
            }
            let grads =
                backprop_through_loss(&run, &inst.ansatz, &bundle, &store).map_err(PfemError::Core)?;
            adam_step(&mut store, &grads, &mut adam).map_err(PfemError::Core)?;
            final_loss = bundle.loss;
            writeln!(metrics, "{step},{epoch},{:.10e},{:.6e},", bundle.loss, adam.lr)?;
            step += 1;
        }
        last_good.copy_from_slice(store.flat());

        if let Some((insts, refs)) = &eval_set {
            let mut errs = Vec::new();
            for (inst, r) in insts.iter().zip(refs) {
                if let Some(r) = r {
                    let pred = predict_instance(&store, &config, inst)?;
                    errs.push(relative_error(&pred, &r.u));
                }
            }
            if !errs.is_empty() {
                let mean = errs.iter().sum::<f64>() / errs.len() as f64;
                writeln!(metrics, "{step},{epoch},,,{mean:.6e}")?;
                test_errors.push((epoch, mean));
            }
        }
        if cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0 {
            save_checkpoint(&out.join(format!("ckpt_epoch{:04}.bin", epoch + 1)), &store, &config)?;
        }
    }
    metrics.flush()?;
    save_checkpoint(&ckpt_path, &store, &config)?;
    let summary = TrainSummary {
        steps: step,
        skipped_inversions: skipped,
        final_loss,
        checkpoint: ckpt_path,
        metrics: metrics_path,
        refs_read_by_training: false,
        test_errors,
    };
    write_json(&out.join("train_summary.json"), &summary)?;
    Ok(summary)
}
