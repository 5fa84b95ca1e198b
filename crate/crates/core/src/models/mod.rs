//! Exactly solvable one-dimensional models: Robin realizations on an
//! interval, a δ-interaction at a point, and a compactly supported potential
//! on the line split by Dirichlet conditions at ±R.

pub mod decouple;
pub mod delta;
pub mod robin;
pub mod shooting;

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Result, SsfError};
use crate::linalg::CMat;
use crate::nevlog::{self, Branch, FnEvaluator};

pub use decouple::DecoupledLineModel;
pub use delta::{DeltaPath, DeltaPointModel};
pub use robin::{RobinCondition, RobinIntervalModel};
pub use shooting::{MeshFunction, OdeTolerance};

/// √z with Im √z > 0 off `[0, ∞)`.
pub fn sqrt_upper(z: Complex64) -> Result<Complex64> {
    if z.im == 0.0 && z.re >= 0.0 {
        return Err(SsfError::BranchViolation { z });
    }
    let s = z.sqrt();
    Ok(if s.im < 0.0 { -s } else { s })
}

/// (1/π) tr Im log K for the value `K` of a Nevanlinna function at `z ∈ ℂ₊`.
pub(crate) fn im_trace_log_value(k: CMat, z: Complex64, branch: Branch) -> Result<f64> {
    let dim = k.nrows();
    let n = FnEvaluator::new(dim, move |_| Ok(k.clone()));
    Ok(nevlog::im_trace_log(&n, z, branch)? / PI)
}

/// Relative singularity threshold for matrices built from shooting data,
/// a few orders above the integrator tolerance.
pub(crate) const SHOOTING_SINGULAR: f64 = 1e-8;

/// Rejects values at which `m` is not invertible to working precision.
pub(crate) fn checked_inverse(m: &CMat, on_fail: SsfError) -> Result<CMat> {
    checked_inverse_rel(m, 1e-12, on_fail)
}

/// Like [`checked_inverse`] with a caller-chosen relative threshold.
pub(crate) fn checked_inverse_rel(m: &CMat, rel: f64, on_fail: SsfError) -> Result<CMat> {
    let scale = crate::linalg::op_norm(m).max(1.0);
    if !(crate::linalg::min_singular(m) > rel * scale) {
        return Err(on_fail);
    }
    crate::linalg::inverse(m).ok_or(on_fail)
}
