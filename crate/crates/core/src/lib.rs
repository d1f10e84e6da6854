//! Core numerics for the pretrained-FEM workflow: a minimal reverse-mode
//! tensor engine, 2D isoparametric meshes, Gaussian random fields, linear and
//! hyperelastic finite element solvers, the Transolver-style point-cloud
//! operator, and the physics losses that couple them.
//!
//! The crate is `no_std` (with `alloc`); everything that touches the
//! filesystem or a clock lives in the companion `pfem` crate.

#![cfg_attr(not(any(test, feature = "std")), no_std)]

extern crate alloc;

pub mod error;
pub mod fem;
pub mod grf;
pub mod math;
pub mod mesh;
pub mod operator;
pub mod physloss;
pub mod tensor;

pub use error::{Error, Result};
