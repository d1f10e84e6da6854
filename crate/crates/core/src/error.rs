//! Crate-wide error type.

use alloc::string::String;
use core::fmt;

/// Errors produced by the numerical kernels.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Tensor/operator shape mismatch; carries the op name and a description
    /// of the offending shapes.
    ShapeMismatch { op: &'static str, detail: String },
    /// A value expected to be scalar was not.
    NotScalar { op: &'static str },
    /// Non-finite value encountered; `what` names the tensor/parameter.
    NonFinite { what: String },
    /// Element Jacobian not positive.
    BadJacobian { element: usize, det: f64 },
    /// Element inversion (det F <= 0) at a quadrature point.
    ElementInversion { element: usize, point: usize, det: f64 },
    /// Mesh consistency violation.
    InvalidMesh(String),
    /// Material parameter out of range at an element.
    InvalidMaterial { element: usize, detail: String },
    /// Conflicting Dirichlet constraints on one dof.
    ConflictingConstraint { dof: usize },
    /// Singular matrix in a direct solve.
    SingularMatrix,
    /// Iteration matrix is not contractive.
    NotContractive { rho: f64 },
    /// Anything else.
    Invalid(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ShapeMismatch { op, detail } => write!(f, "shape mismatch in {op}: {detail}"),
            Error::NotScalar { op } => write!(f, "{op} requires a scalar node"),
            Error::NonFinite { what } => write!(f, "non-finite value in {what}"),
            Error::BadJacobian { element, det } => {
                write!(f, "non-positive Jacobian det {det:e} in element {element}")
            }
            Error::ElementInversion { element, point, det } => write!(
                f,
                "element inversion (det F = {det:e}) in element {element} at quadrature point {point}"
            ),
            Error::InvalidMesh(msg) => write!(f, "invalid mesh: {msg}"),
            Error::InvalidMaterial { element, detail } => {
                write!(f, "invalid material in element {element}: {detail}")
            }
            Error::ConflictingConstraint { dof } => {
                write!(f, "conflicting Dirichlet constraints on dof {dof}")
            }
            Error::SingularMatrix => write!(f, "singular matrix"),
            Error::NotContractive { rho } => {
                write!(f, "iteration matrix is not contractive (rho = {rho})")
            }
            Error::Invalid(msg) => write!(f, "{msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
