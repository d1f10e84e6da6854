//! Material models with pointwise (constant or nodal) parameter fields.

use crate::error::{Error, Result};
use crate::mesh::{shape_values, Mesh};
use alloc::format;
use alloc::vec::Vec;

/// A scalar coefficient field: constant, or nodal values interpolated with
/// the element shape functions.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum MaterialField {
    Constant(f64),
    Nodal(Vec<f64>),
}

impl MaterialField {
    /// Value at a reference point of an element.
    pub fn at(&self, mesh: &Mesh, element: usize, xi: [f64; 2]) -> f64 {
        match self {
            MaterialField::Constant(v) => *v,
            MaterialField::Nodal(values) => {
                let (n, count) = shape_values(mesh.element_type, xi);
                let conn = &mesh.elements[element];
                (0..count).map(|i| n[i] * values[conn[i]]).sum()
            }
        }
    }

    pub fn validate_len(&self, mesh: &Mesh) -> Result<()> {
        if let MaterialField::Nodal(v) = self {
            if v.len() != mesh.n_nodes() {
                return Err(Error::Invalid(format!(
                    "nodal field has {} values for {} nodes",
                    v.len(),
                    mesh.n_nodes()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ElasticParams {
    pub e: MaterialField,
    pub nu: MaterialField,
}

impl ElasticParams {
    pub fn constant(e: f64, nu: f64) -> Self {
        ElasticParams { e: MaterialField::Constant(e), nu: MaterialField::Constant(nu) }
    }

    /// (E, nu) at a quadrature point, validated.
    pub fn at(&self, mesh: &Mesh, element: usize, xi: [f64; 2]) -> Result<(f64, f64)> {
        let e = self.e.at(mesh, element, xi);
        let nu = self.nu.at(mesh, element, xi);
        if e <= 0.0 {
            return Err(Error::InvalidMaterial { element, detail: format!("E = {e}") });
        }
        if nu < 0.0 || nu >= 0.5 {
            return Err(Error::InvalidMaterial { element, detail: format!("nu = {nu}") });
        }
        Ok((e, nu))
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum MaterialModel {
    /// Linear elastic, plane stress.
    PlaneStress(ElasticParams),
    /// Linear elastic, plane strain (the (1 - 2 nu) constitutive factor).
    PlaneStrain(ElasticParams),
    /// Compressible Neo-Hookean, plane strain, total Lagrangian.
    NeoHookean(ElasticParams),
    /// Scalar diffusion with conductivity k.
    Poisson { k: MaterialField },
}

impl MaterialModel {
    pub fn is_linear_elastic(&self) -> bool {
        matches!(self, MaterialModel::PlaneStress(_) | MaterialModel::PlaneStrain(_))
    }

    pub fn elastic_params(&self) -> Option<&ElasticParams> {
        match self {
            MaterialModel::PlaneStress(p)
            | MaterialModel::PlaneStrain(p)
            | MaterialModel::NeoHookean(p) => Some(p),
            MaterialModel::Poisson { .. } => None,
        }
    }

    /// Degrees of freedom per node.
    pub fn dofs_per_node(&self) -> usize {
        match self {
            MaterialModel::Poisson { .. } => 1,
            _ => 2,
        }
    }
}

/// Lamé parameters from Young's modulus and Poisson's ratio.
pub fn lame(e: f64, nu: f64) -> (f64, f64) {
    let lambda = nu * e / ((1.0 + nu) * (1.0 - 2.0 * nu));
    let mu = e / (2.0 * (1.0 + nu));
    (lambda, mu)
}

/// 3x3 constitutive matrix (Voigt order 11, 22, 12 with engineering shear).
pub fn elastic_d_matrix(kind: &MaterialModel, e: f64, nu: f64) -> [[f64; 3]; 3] {
    match kind {
        MaterialModel::PlaneStress(_) => {
            let c = e / (1.0 - nu * nu);
            [[c, c * nu, 0.0], [c * nu, c, 0.0], [0.0, 0.0, c * (1.0 - nu) / 2.0]]
        }
        _ => {
            // plane strain, also the linearization of the Neo-Hookean model
            let (lambda, mu) = lame(e, nu);
            [
                [lambda + 2.0 * mu, lambda, 0.0],
                [lambda, lambda + 2.0 * mu, 0.0],
                [0.0, 0.0, mu],
            ]
        }
    }
}

