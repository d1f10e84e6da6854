//! Command-line surface. Every run writes a resolved-config snapshot under
//! its output directory; exit codes: 0 success, 1 usage/schema error, 2
//! numerical failure (with a failure report written when possible).

use crate::error::{PfemError, Result};
use crate::io::{load_mesh, residual_history_csv, write_json, write_solve_report};
use crate::pipeline::{
    compute_references, convergence_bound_check, evaluate, generate_dataset, patch_test, train,
    warmstart_bench, BenchConfig, PatchConfig, TrainConfig,
};
use crate::problems::{Problem, ProblemSpec};
use clap::{Args, Parser, Subcommand};
use pfem_core::fem::{
    apply_dirichlet, assemble_linear_elasticity, assemble_poisson, cg_solve, dirichlet_constraints,
    newton_solve, ElasticParams, GuessLabel, MaterialField, MaterialModel, NewtonOptions,
};
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "pfem", version, about = "Physics-pretrained finite element pipeline")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a dataset of point-cloud samples from random fields
    Gen(GenArgs),
    /// Compute FEM reference solutions for a dataset
    Refs(RefsArgs),
    /// Train the operator with physics losses only
    Train(TrainArgs),
    /// Evaluate a checkpoint against references
    Eval(EvalArgs),
    /// Warm-start benchmark: zero guess vs operator guess
    Warmstart(WarmstartArgs),
    /// Single-sample pretraining patch test
    PatchTest(PatchArgs),
    /// Solve one mesh file directly with FEM
    Fem(FemArgs),
    /// Iteration-bound diagnostic on a Jacobi model problem
    ConvergenceCheck(ConvergenceArgs),
    /// Validate a mesh file against the schema and geometry checks
    ValidateMesh(ValidateArgs),
}

#[derive(Args)]
struct OutOpt {
    /// Output directory (defaults to $PFEM_OUT or ".")
    #[arg(long)]
    out: Option<PathBuf>,
}

impl OutOpt {
    fn dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| {
            std::env::var_os("PFEM_OUT").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."))
        })
    }
}

#[derive(Args)]
struct ConfigOpt {
    /// JSON config file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dotted-key overrides, e.g. --set operator.channels=32
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    problem: ProblemArg,
    /// Number of samples
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: OutOpt,
    #[command(flatten)]
    config: ConfigOpt,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ProblemArg {
    Plate,
    Beam,
    Cook,
    Poisson,
}

impl From<ProblemArg> for Problem {
    fn from(p: ProblemArg) -> Problem {
        match p {
            ProblemArg::Plate => Problem::Plate,
            ProblemArg::Beam => Problem::Beam,
            ProblemArg::Cook => Problem::Cook,
            ProblemArg::Poisson => Problem::Poisson,
        }
    }
}

#[derive(Args)]
struct RefsArgs {
    /// Dataset directory
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// Held-out dataset (with refs) for per-epoch error logging
    #[arg(long)]
    eval_data: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[command(flatten)]
    out: OutOpt,
    #[command(flatten)]
    config: ConfigOpt,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    out: OutOpt,
}

#[derive(Args)]
struct WarmstartArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// CG relative-residual tolerance
    #[arg(long, default_value_t = 1e-3)]
    tol: f64,
    /// Skip refinement when the prediction residual is below this
    #[arg(long)]
    tol_fine: Option<f64>,
    /// Newton absolute-residual tolerance
    #[arg(long, default_value_t = 1e-6)]
    newton_tol: f64,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[command(flatten)]
    out: OutOpt,
}

#[derive(Args)]
struct PatchArgs {
    #[arg(long, value_enum, default_value = "beam")]
    problem: ProblemArg,
    /// Mesh resolution override for the patch sample
    #[arg(long, default_value_t = 8)]
    resolution: usize,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    out: OutOpt,
    #[command(flatten)]
    config: ConfigOpt,
}

#[derive(Args)]
struct FemArgs {
    #[arg(long)]
    mesh: PathBuf,
    /// plane_stress | plane_strain | neo_hookean | poisson
    #[arg(long, default_value = "plane_stress")]
    material: String,
    #[arg(long, default_value_t = 100.0)]
    e: f64,
    #[arg(long, default_value_t = 0.25)]
    nu: f64,
    /// Conductivity for poisson
    #[arg(long, default_value_t = 1.0)]
    k: f64,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 100000)]
    max_iter: usize,
    #[command(flatten)]
    out: OutOpt,
}

#[derive(Args)]
struct ConvergenceArgs {
    #[arg(long, default_value_t = 20)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: OutOpt,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    mesh: PathBuf,
}

/// Apply `--set a.b=c` overrides onto a serialized config, then re-typecheck
/// (unknown keys are rejected by the target's deny_unknown_fields).
fn resolve_config<T: Serialize + DeserializeOwned>(
    default: T,
    file: Option<&Path>,
    sets: &[String],
) -> Result<T> {
    let mut value: serde_json::Value = match file {
        Some(path) => crate::io::read_json(path)?,
        None => serde_json::to_value(&default)
            .map_err(|e| PfemError::Schema(e.to_string()))?,
    };
    for set in sets {
        let (key, raw) = set
            .split_once('=')
            .ok_or_else(|| PfemError::Usage(format!("--set needs KEY=VALUE, got {set:?}")))?;
        let leaf: serde_json::Value =
            serde_json::from_str(raw).unwrap_or(serde_json::Value::String(raw.to_string()));
        let parts: Vec<&str> = key.split('.').collect();
        let mut cursor = &mut value;
        for part in &parts[..parts.len() - 1] {
            let obj = cursor.as_object_mut().ok_or_else(|| {
                PfemError::Usage(format!("--set {key}: {part} is not an object"))
            })?;
            cursor = obj
                .entry(part.to_string())
                .or_insert_with(|| serde_json::Value::Object(Default::default()));
        }
        let obj = cursor.as_object_mut().ok_or_else(|| {
            PfemError::Usage(format!("--set {key}: target is not an object"))
        })?;
        obj.insert(parts.last().expect("non-empty key").to_string(), leaf);
    }
    serde_json::from_value(value).map_err(|e| PfemError::Schema(e.to_string()))
}

fn snapshot<T: Serialize>(out: &Path, config: &T) -> Result<()> {
    std::fs::create_dir_all(out)?;
    write_json(&out.join("resolved_config.json"), config)
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Gen(args) => {
            let out = args.out.dir();
            let mut spec = resolve_config(
                ProblemSpec::default_for(args.problem.into()),
                args.config.config.as_deref(),
                &args.config.sets,
            )?;
            spec.seed = args.seed;
            snapshot(&out, &spec)?;
            let summary = generate_dataset(&spec, args.n, &out)?;
            println!("generated {} samples under {}", summary.n_samples, out.display());
            Ok(())
        }
        Cmd::Refs(args) => {
            let summary = compute_references(&args.data, args.threads)?;
            println!(
                "references for {} samples ({} failures)",
                summary.n,
                summary.failures.len()
            );
            if !summary.failures.is_empty() {
                return Err(PfemError::Numerical(format!(
                    "reference solves failed for samples {:?}",
                    summary.failures
                )));
            }
            Ok(())
        }
        Cmd::Train(args) => {
            let out = args.out.dir();
            let mut cfg = resolve_config(
                TrainConfig::default(),
                args.config.config.as_deref(),
                &args.config.sets,
            )?;
            if let Some(seed) = args.seed {
                cfg.seed = seed;
            }
            if let Some(epochs) = args.epochs {
                cfg.epochs = epochs;
            }
            snapshot(&out, &cfg)?;
            let summary = train(&args.data, &cfg, args.eval_data.as_deref(), &out)?;
            println!(
                "trained {} steps (skipped {}), final loss {:.6e}, checkpoint {}",
                summary.steps,
                summary.skipped_inversions,
                summary.final_loss,
                summary.checkpoint.display()
            );
            Ok(())
        }
        Cmd::Eval(args) => {
            let out = args.out.dir();
            let stats = evaluate(&args.ckpt, &args.data, Some(&out))?;
            println!(
                "evaluated {} samples: mean relative error {:.4e} (std {:.4e})",
                stats.n_evaluated, stats.mean, stats.std
            );
            Ok(())
        }
        Cmd::Warmstart(args) => {
            let out = args.out.dir();
            let cfg = BenchConfig {
                tol: args.tol,
                tol_fine: args.tol_fine,
                newton_tol: args.newton_tol,
                ..Default::default()
            };
            snapshot(&out, &cfg)?;
            let (agg, _) = warmstart_bench(&args.ckpt, &args.data, &cfg, Some(&out), args.threads)?;
            println!(
                "warm start over {} samples: mean iterations {:.2} -> {:.2}, speedup {:.2}",
                agg.n_used, agg.mean_iters_zero, agg.mean_iters_op, agg.speedup
            );
            Ok(())
        }
        Cmd::PatchTest(args) => {
            let out = args.out.dir();
            let mut cfg = resolve_config(
                PatchConfig::default(),
                args.config.config.as_deref(),
                &args.config.sets,
            )?;
            if let Some(steps) = args.steps {
                cfg.steps = steps;
            }
            if let Some(seed) = args.seed {
                cfg.seed = seed;
            }
            let mut spec = ProblemSpec::default_for(args.problem.into());
            spec.nx = args.resolution;
            spec.ny = args.resolution;
            snapshot(&out, &cfg)?;
            let report = patch_test(&spec, &cfg, Some(&out))?;
            println!(
                "patch test: passed={} steps_to_threshold={:?} final_error={:.4e}",
                report.passed, report.steps_to_threshold, report.final_error
            );
            Ok(())
        }
        Cmd::Fem(args) => {
            let out = args.out.dir();
            std::fs::create_dir_all(&out)?;
            let mesh = load_mesh(&args.mesh)?;
            let (report, u) = match args.material.as_str() {
                "plane_stress" | "plane_strain" => {
                    let params = ElasticParams::constant(args.e, args.nu);
                    let material = if args.material == "plane_stress" {
                        MaterialModel::PlaneStress(params)
                    } else {
                        MaterialModel::PlaneStrain(params)
                    };
                    let (k, f) = assemble_linear_elasticity(&mesh, &material, None)?;
                    let sys = apply_dirichlet(&k, &f, &dirichlet_constraints(&mesh, 2)?)?;
                    let zero = vec![0.0; sys.n_free()];
                    let (u_red, report) = cg_solve(
                        &sys.reduced_k,
                        &sys.reduced_f,
                        &zero,
                        args.tol,
                        args.max_iter,
                        GuessLabel::Zero,
                    );
                    (report, sys.reconstruct(&u_red))
                }
                "neo_hookean" => {
                    let material =
                        MaterialModel::NeoHookean(ElasticParams::constant(args.e, args.nu));
                    let opts = NewtonOptions {
                        tol: args.tol,
                        max_iter: args.max_iter.min(200),
                        ..Default::default()
                    };
                    let u0 = vec![0.0; 2 * mesh.n_nodes()];
                    newton_solve(&mesh, &material, &u0, &opts).map(|(u, r)| (r, u))?
                }
                "poisson" => {
                    let (k, f) =
                        assemble_poisson(&mesh, &MaterialField::Constant(args.k), &|_| 0.0)?;
                    let sys = apply_dirichlet(&k, &f, &dirichlet_constraints(&mesh, 1)?)?;
                    let zero = vec![0.0; sys.n_free()];
                    let (u_red, report) = cg_solve(
                        &sys.reduced_k,
                        &sys.reduced_f,
                        &zero,
                        args.tol,
                        args.max_iter,
                        GuessLabel::Zero,
                    );
                    (report, sys.reconstruct(&u_red))
                }
                other => {
                    return Err(PfemError::Usage(format!("unknown material {other:?}")));
                }
            };
            write_solve_report(&out.join("solve_report.json"), &report)?;
            residual_history_csv(&out.join("residuals.csv"), &report)?;
            write_json(&out.join("solution.json"), &u)?;
            println!(
                "solved: converged={} iterations={} final_residual={:.3e}",
                report.converged,
                report.iterations,
                report.residual_history.last().copied().unwrap_or(f64::NAN)
            );
            if !report.converged {
                return Err(PfemError::Numerical("solver did not converge".into()));
            }
            Ok(())
        }
        Cmd::ConvergenceCheck(args) => {
            let out = args.out.dir();
            std::fs::create_dir_all(&out)?;
            let diag = convergence_bound_check(args.n, args.seed)?;
            write_json(&out.join("convergence.json"), &diag)?;
            let violations = diag.rows.iter().filter(|r| !r.ok).count();
            println!(
                "rho={:.6} rate={:.6}: {} bound rows ({} violations), diminishing relative savings: {}",
                diag.rho,
                diag.rate,
                diag.rows.len(),
                violations,
                diag.diminishing_relative_savings
            );
            Ok(())
        }
        Cmd::ValidateMesh(args) => {
            let mesh = load_mesh(&args.mesh)?;
            println!(
                "ok: {} nodes, {} elements ({:?}), area {:.6}",
                mesh.n_nodes(),
                mesh.n_elements(),
                mesh.element_type,
                mesh.area()
            );
            Ok(())
        }
    }
}

/// Entry point used by the binary and by tests. Returns the process exit
/// code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders its own message (also covers --help/--version)
            let is_help = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = e.print();
            return if is_help { 0 } else { 1 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
