//! JSON model files: explicit stencils, presets, or mass/stiffness pairs,
//! plus optional storage and supply declarations.
//!
//! Three bodies are accepted under `"schema": 1`:
//!
//! * explicit: `{nu, n, m, r}` with stencils `a`, `b`, `c`, `d` (absent
//!   stencils are zero);
//! * preset: `{"preset": "chain" | "plate", "params": {...}}`;
//! * Hamiltonian: `{"mass": [[..]], "stiffness": {stencil}}`.
//!
//! Hamiltonian bodies (including presets) take the modifiers `pinned`
//! (epsilon added to K_0), `damping` (gamma) and `sensing`
//! ("velocity" | "position"); a damped or sensed network is assembled via
//! the collocated actuated form, otherwise the isolated network is built.
//!
//! Stencil JSON: `{"nu": 1, "rows": 1, "cols": 1, "blocks":
//! [{"offset": [-1], "matrix": [[1.0]]}, ...]}` with row-major matrices.

use serde::{Deserialize, Serialize};

use crate::certify::{StorageSpec, SupplySpec};
use crate::error::{Error, Result};
use crate::model::NetworkModel;
use crate::models::{self, ChainParams, PlateParams, Sensing};
use crate::phonon::HamiltonianSpec;
use crate::stencil::MatrixStencil;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BlockJson {
    pub offset: Vec<i64>,
    pub matrix: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct StencilJson {
    pub nu: usize,
    pub rows: usize,
    pub cols: usize,
    pub blocks: Vec<BlockJson>,
}

impl StencilJson {
    pub fn from_stencil(s: &MatrixStencil) -> Self {
        let blocks = s
            .blocks()
            .map(|(off, m)| BlockJson {
                offset: off.to_vec(),
                matrix: (0..m.nrows())
                    .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
                    .collect(),
            })
            .collect();
        Self { nu: s.dim_nu(), rows: s.rows(), cols: s.cols(), blocks }
    }

    pub fn to_stencil(&self) -> Result<MatrixStencil> {
        let mut s = MatrixStencil::new(self.nu, self.rows, self.cols)?;
        for block in &self.blocks {
            if block.matrix.len() != self.rows
                || block.matrix.iter().any(|row| row.len() != self.cols)
            {
                return Err(Error::InvalidArgument(format!(
                    "block at {:?} is not a {}x{} row-major matrix",
                    block.offset, self.rows, self.cols
                )));
            }
            let flat: Vec<f64> = block.matrix.iter().flatten().copied().collect();
            s.insert(&block.offset, nalgebra::DMatrix::from_row_slice(self.rows, self.cols, &flat))?;
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum StorageField {
    Named(String),
    Stencil(StencilJson),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum SupplyField {
    Named(String),
    Stencil(StencilJson),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    #[serde(default)]
    pub schema: u32,

    // explicit form
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<StencilJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<StencilJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<StencilJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<StencilJson>,

    // preset form
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub params: Option<serde_json::Value>,

    // Hamiltonian form
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mass: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stiffness: Option<StencilJson>,

    // Hamiltonian modifiers
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pinned: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub damping: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sensing: Option<String>,

    // energy machinery
    #[serde(skip_serializing_if = "Option::is_none")]
    pub storage: Option<StorageField>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub supply: Option<SupplyField>,
}

/// How the storage was declared.
#[derive(Debug, Clone)]
pub enum StorageChoice {
    Spec(StorageSpec),
    /// Synthesize per-node storage from the Lyapunov equation.
    Lyapunov,
}

/// A fully resolved model file.
pub struct ParsedModel {
    pub model: NetworkModel,
    /// Present for preset and mass/stiffness bodies.
    pub hamiltonian: Option<HamiltonianSpec>,
    pub storage: Option<StorageChoice>,
    pub supply: Option<SupplySpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChainParamsJson {
    #[serde(default = "one")]
    mass: f64,
    #[serde(default = "one")]
    spring: f64,
    #[serde(default)]
    damping: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlateParamsJson {
    #[serde(default = "one")]
    rho: f64,
    #[serde(default = "one")]
    beta: f64,
    #[serde(default = "one")]
    h: f64,
}

fn one() -> f64 {
    1.0
}

pub fn parse_model_file(text: &str) -> Result<ParsedModel> {
    let file: ModelFile = serde_json::from_str(text)
        .map_err(|e| Error::InvalidArgument(format!("model JSON: {e}")))?;
    resolve_model_file(&file)
}

pub fn parse_model_path(path: &std::path::Path) -> Result<ParsedModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::ModelFile {
        path: path.display().to_string(),
        detail: e.to_string(),
    })?;
    parse_model_file(&text).map_err(|e| Error::ModelFile {
        path: path.display().to_string(),
        detail: e.to_string(),
    })
}

pub fn resolve_model_file(file: &ModelFile) -> Result<ParsedModel> {
    if file.schema != SCHEMA_VERSION {
        return Err(Error::InvalidArgument(format!(
            "unsupported schema {}; this build reads schema {SCHEMA_VERSION}",
            file.schema
        )));
    }
    let explicit = file.a.is_some() || file.b.is_some() || file.c.is_some() || file.d.is_some();
    let preset = file.preset.is_some();
    let hamiltonian_body = file.mass.is_some() || file.stiffness.is_some();
    match (explicit, preset, hamiltonian_body) {
        (true, false, false) => resolve_explicit(file),
        (false, true, false) => resolve_preset(file),
        (false, false, true) => resolve_hamiltonian_body(file),
        (false, false, false) => Err(Error::InvalidArgument(
            "model file needs stencils a/b/c/d, a preset, or mass + stiffness".into(),
        )),
        _ => Err(Error::InvalidArgument(
            "model file mixes bodies; use exactly one of explicit stencils, preset, or mass + stiffness"
                .into(),
        )),
    }
}

fn resolve_explicit(file: &ModelFile) -> Result<ParsedModel> {
    let nu = file
        .nu
        .ok_or_else(|| Error::InvalidArgument("explicit model needs \"nu\"".into()))?;
    let n = file.n.ok_or_else(|| Error::InvalidArgument("explicit model needs \"n\"".into()))?;
    let m = file.m.ok_or_else(|| Error::InvalidArgument("explicit model needs \"m\"".into()))?;
    let r = file.r.ok_or_else(|| Error::InvalidArgument("explicit model needs \"r\"".into()))?;
    let take = |field: &Option<StencilJson>, rows: usize, cols: usize, name: &str| -> Result<MatrixStencil> {
        match field {
            Some(json) => {
                let s = json.to_stencil()?;
                if s.dim_nu() != nu || s.rows() != rows || s.cols() != cols {
                    return Err(Error::InvalidArgument(format!(
                        "stencil \"{name}\" must be {rows}x{cols} on Z^{nu}"
                    )));
                }
                Ok(s)
            }
            None => MatrixStencil::new(nu, rows, cols),
        }
    };
    let model = NetworkModel::new(
        take(&file.a, n, n, "a")?,
        take(&file.b, n, m, "b")?,
        take(&file.c, r, n, "c")?,
        take(&file.d, r, m, "d")?,
    )?;
    if file.pinned.is_some() || file.damping.is_some() || file.sensing.is_some() {
        return Err(Error::InvalidArgument(
            "pinned/damping/sensing apply only to Hamiltonian bodies".into(),
        ));
    }
    finish(file, model, None)
}

fn resolve_preset(file: &ModelFile) -> Result<ParsedModel> {
    let name = file.preset.as_deref().expect("caller checked");
    let params = file.params.clone().unwrap_or(serde_json::Value::Object(Default::default()));
    let bad_params =
        |e: serde_json::Error| Error::InvalidArgument(format!("preset params: {e}"));
    let spec = match name {
        "chain" => {
            let p: ChainParamsJson = serde_json::from_value(params).map_err(bad_params)?;
            // params.damping doubles as the modifier when no top-level damping is given
            let spec = models::chain_spec(&ChainParams {
                mass: p.mass,
                spring: p.spring,
                damping: p.damping,
            })?;
            return finish_hamiltonian(file, spec, Some(p.damping));
        }
        "plate" => {
            let p: PlateParamsJson = serde_json::from_value(params).map_err(bad_params)?;
            models::plate_spec(&PlateParams { rho: p.rho, beta: p.beta, h: p.h })?
        }
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown preset \"{other}\"; available: chain, plate"
            )))
        }
    };
    finish_hamiltonian(file, spec, None)
}

fn resolve_hamiltonian_body(file: &ModelFile) -> Result<ParsedModel> {
    let mass_rows = file
        .mass
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("Hamiltonian model needs \"mass\"".into()))?;
    let stiffness = file
        .stiffness
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("Hamiltonian model needs \"stiffness\"".into()))?
        .to_stencil()?;
    let dof = mass_rows.len();
    if dof == 0 || mass_rows.iter().any(|row| row.len() != dof) {
        return Err(Error::InvalidArgument("mass must be a square matrix".into()));
    }
    let flat: Vec<f64> = mass_rows.iter().flatten().copied().collect();
    let mass = nalgebra::DMatrix::from_row_slice(dof, dof, &flat);
    let spec = HamiltonianSpec::new(mass, stiffness)?;
    finish_hamiltonian(file, spec, None)
}

fn finish_hamiltonian(
    file: &ModelFile,
    spec: HamiltonianSpec,
    preset_damping: Option<f64>,
) -> Result<ParsedModel> {
    let spec = match file.pinned {
        Some(eps) => spec.pinned(eps),
        None => spec,
    };
    let gamma = file.damping.or(preset_damping).unwrap_or(0.0);
    let sensing = match file.sensing.as_deref() {
        None => None,
        Some("velocity") => Some(Sensing::Velocity),
        Some("position") => Some(Sensing::Position),
        Some(other) => {
            return Err(Error::InvalidArgument(format!(
                "unknown sensing \"{other}\"; use \"velocity\" or \"position\""
            )))
        }
    };
    let model = if gamma > 0.0 || sensing.is_some() {
        models::damped_actuated(&spec, gamma, None, sensing.unwrap_or(Sensing::Velocity))?
    } else {
        crate::phonon::build_hamiltonian_model(&spec)?
    };
    finish(file, model, Some(spec))
}

fn finish(
    file: &ModelFile,
    model: NetworkModel,
    hamiltonian: Option<HamiltonianSpec>,
) -> Result<ParsedModel> {
    let storage = match &file.storage {
        None => None,
        Some(StorageField::Named(name)) if name == "lyapunov" => Some(StorageChoice::Lyapunov),
        Some(StorageField::Named(other)) => {
            return Err(Error::InvalidArgument(format!(
                "unknown storage \"{other}\"; use a stencil or \"lyapunov\""
            )))
        }
        Some(StorageField::Stencil(json)) => {
            let spec = StorageSpec::new(json.to_stencil()?)?;
            if spec.state_dim() != model.state_dim() {
                return Err(Error::DimensionMismatch {
                    what: "storage state dimension",
                    expected: model.state_dim(),
                    got: spec.state_dim(),
                });
            }
            Some(StorageChoice::Spec(spec))
        }
    };
    let supply = match &file.supply {
        None => None,
        Some(SupplyField::Named(name)) => match name.as_str() {
            "identity" => {
                require_square_io(&model, "identity supply")?;
                Some(SupplySpec::identity(model.dim_nu(), model.input_dim())?)
            }
            "derivative" => {
                require_square_io(&model, "derivative supply")?;
                Some(SupplySpec::derivative(model.dim_nu(), model.input_dim())?)
            }
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown supply \"{other}\"; use a stencil, \"identity\" or \"derivative\""
                )))
            }
        },
        Some(SupplyField::Stencil(json)) => {
            let g = json.to_stencil()?;
            if g.rows() != model.input_dim() || g.cols() != model.output_dim() {
                return Err(Error::InvalidArgument(format!(
                    "supply stencil must be m x r = {} x {}",
                    model.input_dim(),
                    model.output_dim()
                )));
            }
            Some(SupplySpec::new_static(g))
        }
    };
    Ok(ParsedModel { model, hamiltonian, storage, supply })
}

fn require_square_io(model: &NetworkModel, what: &str) -> Result<()> {
    if model.input_dim() != model.output_dim() {
        return Err(Error::InvalidArgument(format!(
            "{what} needs r = m, got r = {}, m = {}",
            model.output_dim(),
            model.input_dim()
        )));
    }
    Ok(())
}

/// Canonical explicit-form export of a parsed model. Parsing the output
/// reproduces the same in-memory model, and the rendering is byte-stable
/// (ordered blocks, fixed field order).
pub fn export_model_file(parsed: &ParsedModel) -> Result<ModelFile> {
    let model = &parsed.model;
    let supply = match &parsed.supply {
        None => None,
        Some(s) if s.is_static() => Some(SupplyField::Stencil(StencilJson::from_stencil(
            s.coefficient(0).expect("static supply"),
        ))),
        Some(s) => {
            // the only polynomial supply with a named form
            let derivative = SupplySpec::derivative(model.dim_nu(), model.input_dim())?;
            if *s == derivative {
                Some(SupplyField::Named("derivative".into()))
            } else {
                return Err(Error::InvalidArgument(
                    "only static or derivative supplies can be exported".into(),
                ));
            }
        }
    };
    Ok(ModelFile {
        schema: SCHEMA_VERSION,
        nu: Some(model.dim_nu()),
        n: Some(model.state_dim()),
        m: Some(model.input_dim()),
        r: Some(model.output_dim()),
        a: Some(StencilJson::from_stencil(model.a())),
        b: Some(StencilJson::from_stencil(model.b())),
        c: Some(StencilJson::from_stencil(model.c())),
        d: Some(StencilJson::from_stencil(model.d())),
        preset: None,
        params: None,
        mass: None,
        stiffness: None,
        pinned: None,
        damping: None,
        sensing: None,
        storage: match &parsed.storage {
            None => None,
            Some(StorageChoice::Lyapunov) => Some(StorageField::Named("lyapunov".into())),
            Some(StorageChoice::Spec(s)) => {
                Some(StorageField::Stencil(StencilJson::from_stencil(s.stencil())))
            }
        },
        supply,
    })
}

pub fn to_canonical_json(file: &ModelFile) -> String {
    serde_json::to_string_pretty(file).expect("model file serialization cannot fail")
}
