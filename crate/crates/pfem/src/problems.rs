//! Problem definitions: the plate, beam, Cook-membrane, and Poisson setups,
//! their Gaussian-random-field variation factors, boundary tagging, hard-BC
//! ansatz, and point-cloud feature encoding.

use crate::error::{PfemError, Result};
use pfem_core::fem::{ElasticParams, MaterialField, MaterialModel};
use pfem_core::grf::{self, FieldSample, GrfSpec};
use pfem_core::mesh::{
    build_structured_mesh, CookGeometry, CornerMap, DirichletBc, ElementType, Mesh, NeumannBc,
    Side, StructuredMesh,
};
use pfem_core::physloss::BcAnsatz;
use pfem_core::tensor::Tensor;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    Plate,
    Beam,
    Cook,
    Poisson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Factor {
    Geometry,
    Material,
    Boundary,
}

/// Per-factor random-field settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrfSection {
    pub e: GrfSpec,
    pub nu: GrfSpec,
    pub ty: GrfSpec,
    pub k: GrfSpec,
    /// Cook clamp length (parametric, on the left edge).
    pub clamp_len: GrfSpec,
    /// Cook traction segment center and half-length (parametric).
    pub traction_center: GrfSpec,
    pub traction_len: GrfSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub schema_version: u32,
    pub problem: Problem,
    pub nx: usize,
    pub ny: usize,
    pub element_type: String,
    pub factors: Vec<Factor>,
    pub grf: GrfSection,
    pub seed: u64,
}

fn grf1(modes: usize, alpha: f64, mean: f64, amplitude: f64, clip: [f64; 2]) -> GrfSpec {
    GrfSpec { dimension: 1, modes, alpha, mean, amplitude, clip }
}

fn grf2(modes: usize, alpha: f64, mean: f64, amplitude: f64, clip: [f64; 2]) -> GrfSpec {
    GrfSpec { dimension: 2, modes, alpha, mean, amplitude, clip }
}

impl ProblemSpec {
    /// Desk-scale defaults per problem; material fields follow the baseline
    /// E = 100, nu = 0.25 with clips keeping the problem well posed.
    pub fn default_for(problem: Problem) -> Self {
        let (nx, ny, element_type, factors, ty) = match problem {
            Problem::Plate => (
                24,
                24,
                "Q4",
                vec![Factor::Material, Factor::Boundary],
                grf1(6, 1.5, 0.0, 1.0, [-2.0, 2.0]),
            ),
            Problem::Beam => (
                16,
                16,
                "Q4",
                vec![Factor::Material, Factor::Boundary],
                grf1(4, 1.5, -0.3, 0.12, [-0.5, -0.1]),
            ),
            Problem::Cook => (
                8,
                8,
                "Q8",
                vec![Factor::Geometry, Factor::Material, Factor::Boundary],
                grf1(4, 1.5, 0.6, 0.25, [0.15, 1.1]),
            ),
            Problem::Poisson => (16, 16, "Q4", vec![Factor::Material], grf1(4, 1.5, 0.0, 0.5, [-1.0, 1.0])),
        };
        ProblemSpec {
            schema_version: 1,
            problem,
            nx,
            ny,
            element_type: element_type.to_string(),
            factors,
            grf: GrfSection {
                e: grf2(4, 2.0, 100.0, 25.0, [50.0, 150.0]),
                nu: grf2(4, 2.0, 0.25, 0.025, [0.2, 0.3]),
                ty,
                k: grf2(4, 2.0, 1.0, 0.4, [0.2, 1.8]),
                clamp_len: grf1(2, 1.0, 0.75, 0.15, [0.5, 1.0]),
                traction_center: grf1(2, 1.0, 0.5, 0.15, [0.3, 0.7]),
                traction_len: grf1(2, 1.0, 0.5, 0.15, [0.3, 0.8]),
            },
            seed: 0,
        }
    }

    pub fn element_type(&self) -> Result<ElementType> {
        match self.element_type.as_str() {
            "T3" => Ok(ElementType::T3),
            "Q4" => Ok(ElementType::Q4),
            "Q8" => Ok(ElementType::Q8),
            other => Err(PfemError::Schema(format!("unknown element_type {other:?}"))),
        }
    }

    pub fn has(&self, f: Factor) -> bool {
        self.factors.contains(&f)
    }

    /// Point-cloud feature width for this problem.
    pub fn in_features(&self) -> usize {
        match self.problem {
            Problem::Plate | Problem::Beam => 5,
            Problem::Cook => 6,
            Problem::Poisson => 3,
        }
    }

    pub fn out_features(&self) -> usize {
        match self.problem {
            Problem::Poisson => 1,
            _ => 2,
        }
    }

    /// Physical bounding box (x0, y0, x1, y1).
    pub fn bbox(&self) -> [f64; 4] {
        match self.problem {
            Problem::Plate => [0.0, 0.0, 5.0, 5.0],
            Problem::Beam => [0.0, 0.0, 4.0, 1.0],
            Problem::Cook => [0.0, 0.0, 48.0, 60.0],
            Problem::Poisson => [0.0, 0.0, 1.0, 1.0],
        }
    }

    /// Traction normalization used in the feature encoding.
    pub fn traction_scale(&self) -> f64 {
        match self.problem {
            Problem::Beam => 0.3,
            _ => 1.0,
        }
    }

    /// Characteristic magnitude of the output field, folded into the ansatz
    /// multiplier so the network produces O(1) values: roughly t L / E for
    /// the elastic problems, f L^2 / k for diffusion.
    pub fn output_scale(&self) -> f64 {
        match self.problem {
            Problem::Plate => 0.05,
            Problem::Beam => 1.0,
            Problem::Cook => 0.5,
            Problem::Poisson => 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 {
            return Err(PfemError::Schema("nx and ny must be positive".into()));
        }
        self.element_type()?;
        if self.problem == Problem::Cook && self.has(Factor::Geometry) {
            // geometry factor needs well-formed span fields
            for spec in [&self.grf.clamp_len, &self.grf.traction_center, &self.grf.traction_len] {
                spec.validate().map_err(PfemError::Core)?;
            }
        }
        Ok(())
    }

    /// The shared base mesh (no boundary conditions tagged).
    pub fn base_mesh(&self) -> Result<StructuredMesh> {
        let et = self.element_type()?;
        let [x0, y0, x1, y1] = self.bbox();
        let map = match self.problem {
            Problem::Cook => CookGeometry::standard().corner_map(),
            _ => CornerMap::rectangle(x0, y0, x1, y1),
        };
        Ok(build_structured_mesh(self.nx, self.ny, et, &map)?)
    }
}

/// Realized per-sample randomness, stored in the dataset for reproducibility.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrfDump {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub e: Option<FieldSample>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub nu: Option<FieldSample>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ty: Option<FieldSample>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub k: Option<FieldSample>,
    /// Cook spans: [clamp_lo, clamp_hi, traction_lo, traction_hi].
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub spans: Option<[f64; 4]>,
}

/// One dataset sample: nodal fields, boundary tags, and the random-field
/// coefficients they came from. No solution data is stored here.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleData {
    pub schema_version: u32,
    pub problem: Problem,
    pub mesh_file: String,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub e_nodes: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub nu_nodes: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub k_nodes: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ty_nodes: Option<Vec<f64>>,
    pub dirichlet: Vec<DirichletBc>,
    pub neumann: Vec<NeumannBc>,
    pub grf: GrfDump,
}

fn derive_seed(base: u64, index: u64, stream: u64) -> u64 {
    // splitmix-style mixing keeps streams decoupled
    let mut z = base
        .wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(stream.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draw one sample's fields and boundary tags.
pub fn draw_sample(
    spec: &ProblemSpec,
    sm: &StructuredMesh,
    mesh_file: &str,
    index: u64,
) -> Result<SampleData> {
    let mesh = &sm.mesh;
    let [x0, y0, x1, y1] = spec.bbox();
    let norm = |p: [f64; 2]| [(p[0] - x0) / (x1 - x0), (p[1] - y0) / (y1 - y0)];
    let seed = derive_seed(spec.seed, index, 0);

    let mut dump = GrfDump { e: None, nu: None, ty: None, k: None, spans: None };
    let mut sample = SampleData {
        schema_version: 1,
        problem: spec.problem,
        mesh_file: mesh_file.to_string(),
        seed,
        e_nodes: None,
        nu_nodes: None,
        k_nodes: None,
        ty_nodes: None,
        dirichlet: Vec::new(),
        neumann: Vec::new(),
        grf: GrfDump { e: None, nu: None, ty: None, k: None, spans: None },
    };

    // material fields
    if spec.problem == Problem::Poisson {
        let field = if spec.has(Factor::Material) {
            grf::sample(&spec.grf.k, derive_seed(spec.seed, index, 1))?
        } else {
            grf::constant(spec.grf.k.mean)
        };
        sample.k_nodes = Some(mesh.nodes.iter().map(|p| field.evaluate(norm(*p))).collect());
        dump.k = Some(field);
    } else {
        let (e_field, nu_field) = if spec.has(Factor::Material) {
            (
                grf::sample(&spec.grf.e, derive_seed(spec.seed, index, 1))?,
                grf::sample(&spec.grf.nu, derive_seed(spec.seed, index, 2))?,
            )
        } else {
            (grf::constant(spec.grf.e.mean), grf::constant(spec.grf.nu.mean))
        };
        sample.e_nodes = Some(mesh.nodes.iter().map(|p| e_field.evaluate(norm(*p))).collect());
        sample.nu_nodes = Some(mesh.nodes.iter().map(|p| nu_field.evaluate(norm(*p))).collect());
        dump.e = Some(e_field);
        dump.nu = Some(nu_field);
    }

    // geometry spans (Cook only)
    let spans = if spec.problem == Problem::Cook {
        let s = if spec.has(Factor::Geometry) {
            let cl = grf::sample(&spec.grf.clamp_len, derive_seed(spec.seed, index, 3))?
                .evaluate_1d(0.5);
            let tc = grf::sample(&spec.grf.traction_center, derive_seed(spec.seed, index, 4))?
                .evaluate_1d(0.5);
            let tl = grf::sample(&spec.grf.traction_len, derive_seed(spec.seed, index, 5))?
                .evaluate_1d(0.5);
            let lo = (tc - 0.5 * tl).max(0.0);
            let hi = (tc + 0.5 * tl).min(1.0);
            [0.0, cl, lo, hi]
        } else {
            [0.0, 1.0, 0.0, 1.0]
        };
        dump.spans = Some(s);
        Some(s)
    } else {
        None
    };

    // Dirichlet tagging
    match spec.problem {
        Problem::Plate | Problem::Beam => {
            for &n in sm.side_nodes(Side::Left) {
                sample.dirichlet.push(DirichletBc { node: n, ux: Some(0.0), uy: Some(0.0) });
            }
        }
        Problem::Cook => {
            let [clo, chi, _, _] = spans.expect("cook spans");
            let params = &sm.side_node_params[Side::Left.index()];
            for (&n, &t) in sm.side_nodes(Side::Left).iter().zip(params) {
                if t >= clo - 1e-12 && t <= chi + 1e-12 {
                    sample.dirichlet.push(DirichletBc { node: n, ux: Some(0.0), uy: Some(0.0) });
                }
            }
        }
        Problem::Poisson => {
            let mut seen = vec![false; mesh.n_nodes()];
            for side in Side::ALL {
                for &n in sm.side_nodes(side) {
                    if !seen[n] {
                        seen[n] = true;
                        sample.dirichlet.push(DirichletBc { node: n, ux: Some(0.0), uy: None });
                    }
                }
            }
        }
    }

    // Neumann tagging with the boundary traction profile
    if spec.problem != Problem::Poisson {
        let ty_field = if spec.has(Factor::Boundary) {
            grf::sample(&spec.grf.ty, derive_seed(spec.seed, index, 6))?
        } else {
            grf::constant(spec.grf.ty.mean)
        };
        let tx = if spec.problem == Problem::Plate { 1.0 } else { 0.0 };
        let (tlo, thi) = match spans {
            Some([_, _, lo, hi]) => (lo, hi),
            None => (0.0, 1.0),
        };
        for (edge, span) in sm.side_edges(Side::Right) {
            let mid = 0.5 * (span[0] + span[1]);
            if mid >= tlo && mid <= thi {
                sample
                    .neumann
                    .push(NeumannBc { edge: edge.clone(), tx, ty: ty_field.evaluate_1d(mid) });
            }
        }
        // nodal traction encoding for the features: the boundary profile is
        // broadcast along the edge parameter so every point reads the load
        // (zeroed outside the traction span)
        let [bx0, by0, _, by1] = [spec.bbox()[0], spec.bbox()[1], spec.bbox()[2], spec.bbox()[3]];
        let _ = bx0;
        let mut ty_nodes = vec![0.0; mesh.n_nodes()];
        for (n, p) in mesh.nodes.iter().enumerate() {
            let t = (p[1] - by0) / (by1 - by0);
            if t >= tlo - 1e-12 && t <= thi + 1e-12 {
                ty_nodes[n] = ty_field.evaluate_1d(t);
            }
        }
        sample.ty_nodes = Some(ty_nodes);
        dump.ty = Some(ty_field);
    }

    sample.grf = dump;
    Ok(sample)
}

/// Loss family of a problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    LinearElastic,
    NeoHookean,
    Poisson,
}

/// Everything the pipeline needs to train on or solve one sample.
pub struct ProblemInstance {
    pub mesh: Mesh,
    pub material: MaterialModel,
    pub ansatz: BcAnsatz,
    pub features: Tensor,
    pub kind: ProblemKind,
}

impl ProblemInstance {
    pub fn width(&self) -> usize {
        if self.kind == ProblemKind::Poisson {
            1
        } else {
            2
        }
    }

    pub fn n_dofs(&self) -> usize {
        self.mesh.n_nodes() * self.width()
    }
}

/// Bind a sample to the base mesh: tags boundaries, builds the material,
/// ansatz, and feature matrix.
pub fn instantiate(
    spec: &ProblemSpec,
    base: &Mesh,
    sample: &SampleData,
) -> Result<ProblemInstance> {
    let mut mesh = base.clone();
    mesh.dirichlet = sample.dirichlet.clone();
    mesh.neumann = sample.neumann.clone();

    let nn = mesh.n_nodes();
    let field = |v: &Option<Vec<f64>>, what: &str| -> Result<Vec<f64>> {
        v.clone().ok_or_else(|| PfemError::Schema(format!("sample is missing {what}")))
    };

    let [x0, y0, x1, y1] = spec.bbox();
    let (kind, material, ansatz) = match spec.problem {
        Problem::Plate => {
            let params = ElasticParams {
                e: MaterialField::Nodal(field(&sample.e_nodes, "e_nodes")?),
                nu: MaterialField::Nodal(field(&sample.nu_nodes, "nu_nodes")?),
            };
            let ansatz =
                BcAnsatz::segment_clamp(&mesh.nodes, [x0, y0], [x0, y1], x1 - x0);
            (ProblemKind::LinearElastic, MaterialModel::PlaneStress(params), ansatz)
        }
        Problem::Beam => {
            let params = ElasticParams {
                e: MaterialField::Nodal(field(&sample.e_nodes, "e_nodes")?),
                nu: MaterialField::Nodal(field(&sample.nu_nodes, "nu_nodes")?),
            };
            let ansatz =
                BcAnsatz::segment_clamp(&mesh.nodes, [x0, y0], [x0, y1], x1 - x0);
            (ProblemKind::NeoHookean, MaterialModel::NeoHookean(params), ansatz)
        }
        Problem::Cook => {
            let params = ElasticParams {
                e: MaterialField::Nodal(field(&sample.e_nodes, "e_nodes")?),
                nu: MaterialField::Nodal(field(&sample.nu_nodes, "nu_nodes")?),
            };
            let spans = sample
                .grf
                .spans
                .ok_or_else(|| PfemError::Schema("cook sample is missing spans".into()))?;
            let geometry = CookGeometry::standard();
            let map = geometry.corner_map();
            let a = map.map(0.0, spans[0]);
            let b = map.map(0.0, spans[1]);
            let ansatz = BcAnsatz::segment_clamp(&mesh.nodes, a, b, x1 - x0);
            (ProblemKind::NeoHookean, MaterialModel::NeoHookean(params), ansatz)
        }
        Problem::Poisson => {
            let k = MaterialField::Nodal(field(&sample.k_nodes, "k_nodes")?);
            let ansatz = BcAnsatz::box_clamp(&mesh.nodes, x0, x1, y0, y1, x1 - x0);
            (ProblemKind::Poisson, MaterialModel::Poisson { k }, ansatz)
        }
    };
    let ansatz = ansatz.scaled(spec.output_scale());
    ansatz
        .validate_against(&mesh, if kind == ProblemKind::Poisson { 1 } else { 2 })
        .map_err(PfemError::Core)?;

    // feature matrix
    let width = spec.in_features();
    let mut data = Vec::with_capacity(nn * width);
    let tscale = spec.traction_scale();
    for i in 0..nn {
        let p = mesh.nodes[i];
        data.push((p[0] - x0) / (x1 - x0));
        data.push((p[1] - y0) / (y1 - y0));
        match spec.problem {
            Problem::Poisson => {
                data.push(sample.k_nodes.as_ref().expect("validated")[i]);
            }
            _ => {
                data.push(sample.e_nodes.as_ref().expect("validated")[i] / 100.0);
                data.push(sample.nu_nodes.as_ref().expect("validated")[i]);
                data.push(sample.ty_nodes.as_ref().map_or(0.0, |v| v[i]) / tscale);
                if spec.problem == Problem::Cook {
                    let clamped = sample.dirichlet.iter().any(|d| d.node == i);
                    data.push(if clamped { 1.0 } else { 0.0 });
                }
            }
        }
    }
    let features = Tensor::matrix(nn, width, data).map_err(PfemError::Core)?;

    Ok(ProblemInstance { mesh, material, ansatz, features, kind })
}

/// Poisson source term (fixed across samples; all elasticity problems have
/// zero body force).
pub fn poisson_source() -> impl Fn([f64; 2]) -> f64 + Copy {
    |_| 1.0
}
