//! Descriptor files: JSON documents with a top-level `kind`.
//!
//! ```json
//! {"kind": "pair", "n": 1, "d": 1, "A": [[0, 0]], "G": [[1, 0]], "T": [[1, 0]], "zeta0": -1}
//! {"kind": "robin", "length": 1, "beta": 3, "beta0": [0, 0], "beta1": [1, 1],
//!  "a": [0, 0, 0], "mesh_size": 0.5}
//! {"kind": "delta", "alpha": -2, "comparison_c": 1, "path": "direct"}
//! {"kind": "decouple", "cutoff": 1, "V": [-1, -1, -1], "mesh_size": 1}
//! ```
//!
//! Matrices are row-major lists of `[re, im]` pairs: `A` is n×n, `G` is n×d
//! and `T` is d×d. Mesh arrays sample the potential at equally spaced nodes
//! `mesh_size` apart, covering `[0, length]` for `robin` and `[−cutoff, cutoff]`
//! for `decouple`. Without `a` the Robin potential is zero.

use serde::Deserialize;
use ssf_core::linalg::{c, CMat};
use ssf_core::models::{DecoupledLineModel, DeltaPath, DeltaPointModel, MeshFunction, RobinIntervalModel};
use ssf_core::{HermitianOperator, PerturbationPair, SsfError};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Descriptor {
    #[serde(alias = "matrix")]
    Pair(PairDescriptor),
    Robin(RobinDescriptor),
    Delta(DeltaDescriptor),
    Decouple(DecoupleDescriptor),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairDescriptor {
    pub n: usize,
    pub d: usize,
    #[serde(rename = "A")]
    pub a: Vec<[f64; 2]>,
    #[serde(rename = "G")]
    pub g: Vec<[f64; 2]>,
    #[serde(rename = "T")]
    pub t: Vec<[f64; 2]>,
    #[serde(default)]
    pub zeta0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobinDescriptor {
    pub length: f64,
    pub beta: f64,
    pub beta0: [f64; 2],
    pub beta1: [f64; 2],
    #[serde(default)]
    pub a: Option<Vec<f64>>,
    #[serde(default)]
    pub mesh_size: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathChoice {
    Direct,
    Comparison,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeltaDescriptor {
    pub alpha: f64,
    #[serde(default)]
    pub comparison_c: Option<f64>,
    #[serde(default)]
    pub path: Option<PathChoice>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoupleDescriptor {
    pub cutoff: f64,
    #[serde(rename = "V")]
    pub v: Vec<f64>,
    pub mesh_size: f64,
}

impl Descriptor {
    pub fn parse(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| format!("descriptor does not parse: {e}"))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Descriptor::Pair(_) => "pair",
            Descriptor::Robin(_) => "robin",
            Descriptor::Delta(_) => "delta",
            Descriptor::Decouple(_) => "decouple",
        }
    }
}

fn matrix(name: &str, entries: &[[f64; 2]], rows: usize, cols: usize) -> Result<CMat, SsfError> {
    if entries.len() != rows * cols {
        return Err(SsfError::DimensionMismatch(format!(
            "{name} needs {rows}x{cols} = {} entries, got {}",
            rows * cols,
            entries.len()
        )));
    }
    let values: Vec<_> = entries.iter().map(|&[re, im]| c(re, im)).collect();
    Ok(CMat::from_row_slice(rows, cols, &values))
}

/// Prefixes validation errors with the offending field.
fn in_field(name: &str, e: SsfError) -> SsfError {
    match e {
        SsfError::NotHermitian { .. } | SsfError::InvalidInput(_) | SsfError::DimensionMismatch(_) => {
            SsfError::InvalidInput(format!("{name}: {e}"))
        }
        other => other,
    }
}

impl PairDescriptor {
    pub fn build(&self) -> Result<PerturbationPair, SsfError> {
        if self.n == 0 || self.d == 0 {
            return Err(SsfError::DimensionMismatch("n and d must be positive".into()));
        }
        let a = matrix("A", &self.a, self.n, self.n)?;
        let g = matrix("G", &self.g, self.n, self.d)?;
        let t = matrix("T", &self.t, self.d, self.d)?;
        let a_op = HermitianOperator::new(a).map_err(|e| in_field("A", e))?;
        if let Err(e) = HermitianOperator::new(t.clone()) {
            return Err(in_field("T", e));
        }
        PerturbationPair::new(a_op, g, t, self.zeta0)
    }
}

fn mesh(name: &str, start: f64, end: f64, values: &[f64], h: f64) -> Result<MeshFunction, SsfError> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(SsfError::InvalidInput(format!("mesh_size must be positive, got {h}")));
    }
    if values.len() < 2 {
        return Err(SsfError::InvalidInput(format!("{name} needs at least two mesh samples")));
    }
    let covered = h * (values.len() - 1) as f64;
    if (covered - (end - start)).abs() > 1e-9 * (end - start).abs().max(1.0) {
        return Err(SsfError::InvariantViolation(format!(
            "{name} mesh covers length {covered} but the domain [{start}, {end}] has length {}",
            end - start
        )));
    }
    MeshFunction::new(start, h, values.to_vec())
}

impl RobinDescriptor {
    pub fn build(&self) -> Result<RobinIntervalModel, SsfError> {
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(SsfError::InvalidInput(format!("length must be positive, got {}", self.length)));
        }
        let potential = match (&self.a, self.mesh_size) {
            (Some(a), Some(h)) => mesh("a", 0.0, self.length, a, h)?,
            (Some(_), None) => return Err(SsfError::InvalidInput("a given without mesh_size".into())),
            (None, _) => MeshFunction::constant(0.0, self.length, 0.0)?,
        };
        RobinIntervalModel::new(potential, self.beta0, self.beta1, self.beta)
    }
}

/// Comparison strength used when the descriptor does not name one.
pub fn default_comparison_c(alpha: f64) -> f64 {
    alpha.max(0.0) + 1.0
}

impl DeltaDescriptor {
    pub fn path(&self) -> DeltaPath {
        match self.path {
            Some(PathChoice::Direct) => DeltaPath::Direct,
            Some(PathChoice::Comparison) => DeltaPath::Comparison,
            None if self.alpha < 0.0 => DeltaPath::Direct,
            None => DeltaPath::Comparison,
        }
    }

    pub fn build(&self) -> Result<DeltaPointModel, SsfError> {
        let cc = match (self.comparison_c, self.path()) {
            (Some(cc), _) => Some(cc),
            (None, DeltaPath::Comparison) => Some(default_comparison_c(self.alpha)),
            (None, DeltaPath::Direct) => None,
        };
        let model = DeltaPointModel::new(self.alpha, cc)?;
        if self.path() == DeltaPath::Direct && self.alpha >= 0.0 {
            return Err(SsfError::SignPathMismatch { alpha: self.alpha });
        }
        Ok(model)
    }
}

impl DecoupleDescriptor {
    pub fn build(&self) -> Result<DecoupledLineModel, SsfError> {
        if !(self.cutoff > 0.0 && self.cutoff.is_finite()) {
            return Err(SsfError::InvalidInput(format!("cutoff must be positive, got {}", self.cutoff)));
        }
        let v = mesh("V", -self.cutoff, self.cutoff, &self.v, self.mesh_size)?;
        DecoupledLineModel::new(self.cutoff, v)
    }
}
