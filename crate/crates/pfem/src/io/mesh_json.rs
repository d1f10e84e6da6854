//! Mesh JSON schema:
//! `{ "element_type": "Q4"|"Q8"|"T3", "nodes": [[x,y],...],
//!    "elements": [[i0,...],...],
//!    "dirichlet": [{"node":id,"ux":val|null,"uy":val|null}],
//!    "neumann": [{"edge":[n0,n1(,n2)],"tx":val,"ty":val}] }`

use crate::error::{PfemError, Result};
use pfem_core::mesh::{DirichletBc, ElementType, Mesh, NeumannBc};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeshJson {
    element_type: String,
    nodes: Vec<[f64; 2]>,
    elements: Vec<Vec<usize>>,
    #[serde(default)]
    dirichlet: Vec<DirichletJson>,
    #[serde(default)]
    neumann: Vec<NeumannJson>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DirichletJson {
    node: usize,
    ux: Option<f64>,
    uy: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NeumannJson {
    edge: Vec<usize>,
    tx: f64,
    ty: f64,
}

fn element_type_name(et: ElementType) -> &'static str {
    match et {
        ElementType::T3 => "T3",
        ElementType::Q4 => "Q4",
        ElementType::Q8 => "Q8",
    }
}

fn parse_element_type(name: &str) -> Result<ElementType> {
    match name {
        "T3" => Ok(ElementType::T3),
        "Q4" => Ok(ElementType::Q4),
        "Q8" => Ok(ElementType::Q8),
        other => Err(PfemError::Schema(format!("unknown element_type {other:?}"))),
    }
}

/// Load a mesh and run the full consistency validator.
pub fn load_mesh(path: &Path) -> Result<Mesh> {
    let raw: MeshJson = super::read_json(path)?;
    let mesh = Mesh {
        element_type: parse_element_type(&raw.element_type)?,
        nodes: raw.nodes,
        elements: raw.elements,
        dirichlet: raw
            .dirichlet
            .into_iter()
            .map(|d| DirichletBc { node: d.node, ux: d.ux, uy: d.uy })
            .collect(),
        neumann: raw
            .neumann
            .into_iter()
            .map(|n| NeumannBc { edge: n.edge, tx: n.tx, ty: n.ty })
            .collect(),
    };
    mesh.validate().map_err(|e| {
        PfemError::Schema(format!("{}: {e}", path.display()))
    })?;
    Ok(mesh)
}

pub fn save_mesh(mesh: &Mesh, path: &Path) -> Result<()> {
    let raw = MeshJson {
        element_type: element_type_name(mesh.element_type).to_string(),
        nodes: mesh.nodes.clone(),
        elements: mesh.elements.clone(),
        dirichlet: mesh
            .dirichlet
            .iter()
            .map(|d| DirichletJson { node: d.node, ux: d.ux, uy: d.uy })
            .collect(),
        neumann: mesh
            .neumann
            .iter()
            .map(|n| NeumannJson { edge: n.edge.clone(), tx: n.tx, ty: n.ty })
            .collect(),
    };
    let text = serde_json::to_string_pretty(&raw).expect("mesh serializes");
    std::fs::write(path, text)?;
    Ok(())
}
