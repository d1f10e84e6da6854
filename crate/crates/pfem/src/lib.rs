//! Desk-scale pipeline around `pfem-core`: dataset generation from Gaussian
//! random fields, physics-only operator training, FEM reference solutions,
//! warm-start benchmarking, patch tests, and the iteration-bound diagnostic,
//! all behind a `pfem` command-line binary.

pub mod cli;
pub mod error;
pub mod io;
pub mod pipeline;
pub mod problems;

pub use error::{PfemError, Result};
