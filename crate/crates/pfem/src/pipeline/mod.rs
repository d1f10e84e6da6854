//! Pipeline stages: dataset generation, reference solutions, physics-only
//! training, evaluation, warm-start benchmarking, patch tests, and the
//! iteration-bound diagnostic.

mod convergence;
mod dataset;
mod evaluate;
mod patch;
mod references;
mod train;
mod warmstart;

pub use convergence::{convergence_bound_check, BoundRow, ConvergenceDiagnostic, SavingsRow};
pub use dataset::{generate_dataset, load_dataset, load_references, Dataset, GenSummary};
pub use evaluate::{evaluate, predict_instance, relative_error, EvalStats};
pub use patch::{patch_test, PatchConfig, PatchReport};
pub use references::{compute_references, solve_reference, RefSummary};
pub use train::{train, LossObject, OperatorSection, TrainConfig, TrainSummary};
pub use warmstart::{warmstart_bench, BenchAggregate, BenchConfig, SampleBench};
