//! `B = −d²/dx² + V` against `A = −d²/dx²` on the line for `V` supported in
//! `(−R, R)`, decoupled by Dirichlet conditions at `±R`.
//!
//! Boundary data live on the two points `{−R, R}`. Interior Neumann data are
//! outward derivatives `(−u′(−R), u′(R))`; the exterior half-lines carry the
//! decaying solutions `e^{i√z|x|}`, whose outward derivatives give
//! `D_ext = −i√z I`. The identification between boundary spaces is the
//! identity here.

use num_complex::Complex64;

use super::shooting::{self, MeshFunction, OdeTolerance};
use super::{checked_inverse, checked_inverse_rel, im_trace_log_value, sqrt_upper, SHOOTING_SINGULAR};
use crate::error::{Result, SsfError};
use crate::exec::{self, Execution};
use crate::linalg::{c, identity, CMat};
use crate::nevlog::{Branch, BoundaryValue, EpsilonSchedule, NevanlinnaFunction};
use crate::ssf::{validate_grid, SsfGrid};

#[derive(Debug, Clone, PartialEq)]
pub struct DecoupledLineModel {
    cutoff: f64,
    potential: MeshFunction,
    free: MeshFunction,
    tol: OdeTolerance,
}

impl DecoupledLineModel {
    /// `potential` must be meshed on exactly `[−cutoff, cutoff]`; it is zero
    /// outside by construction.
    pub fn new(cutoff: f64, potential: MeshFunction) -> Result<Self> {
        if !(cutoff > 0.0) || !cutoff.is_finite() {
            return Err(SsfError::InvalidInput(format!("cutoff must be positive, got {cutoff}")));
        }
        let slack = 1e-9 * cutoff;
        if (potential.start() + cutoff).abs() > slack || (potential.end() - cutoff).abs() > slack {
            return Err(SsfError::InvariantViolation(format!(
                "potential mesh [{}, {}] must cover exactly [-{cutoff}, {cutoff}]",
                potential.start(),
                potential.end()
            )));
        }
        let free = MeshFunction::constant(-cutoff, cutoff, 0.0)?;
        Ok(Self { cutoff, potential, free, tol: OdeTolerance::default() })
    }

    /// Constant `value` on `(−cutoff, cutoff)`.
    pub fn square_well(cutoff: f64, value: f64) -> Result<Self> {
        Self::new(cutoff, MeshFunction::constant(-cutoff, cutoff, value)?)
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn potential(&self) -> &MeshFunction {
        &self.potential
    }

    fn interior(&self, with_potential: bool) -> &MeshFunction {
        if with_potential {
            &self.potential
        } else {
            &self.free
        }
    }

    /// V on the whole line.
    pub fn potential_at(&self, x: f64) -> f64 {
        if x.abs() <= self.cutoff {
            self.potential.value(x)
        } else {
            0.0
        }
    }

    /// Dirichlet data `U` and outward derivative data `W` of the interior
    /// fundamental system, one solution per column.
    pub fn boundary_data(&self, z: Complex64, with_potential: bool) -> Result<(CMat, CMat)> {
        let f = shooting::fundamental_system(self.interior(with_potential), z, &self.tol)?;
        let one = c(1.0, 0.0);
        let zero = c(0.0, 0.0);
        let u = CMat::from_row_slice(2, 2, &[one, zero, f.value[0], f.value[1]]);
        let w = CMat::from_row_slice(2, 2, &[zero, -one, f.derivative[0], f.derivative[1]]);
        Ok((u, w))
    }

    /// Interior Dirichlet-to-Neumann matrix `W U⁻¹`.
    pub fn interior_dtn(&self, z: Complex64, with_potential: bool) -> Result<CMat> {
        let (u, w) = self.boundary_data(z, with_potential)?;
        Ok(w * checked_inverse_rel(&u, SHOOTING_SINGULAR, SsfError::DirichletEigenvalueHit { z })?)
    }

    /// Exterior Dirichlet-to-Neumann value `−i√z` on each half-line.
    pub fn exterior_dtn(&self, z: Complex64) -> Result<Complex64> {
        Ok(-Complex64::i() * sqrt_upper(z)?)
    }

    /// 𝔑(z) (free interior) or 𝔑_V(z) = (D_int + D_ext)⁻¹, evaluated as
    /// `U (W + D_ext U)⁻¹` so interior Dirichlet eigenvalues are harmless.
    pub fn inverse_dtn_sum(&self, z: Complex64, with_potential: bool) -> Result<CMat> {
        let (u, w) = self.boundary_data(z, with_potential)?;
        let ext = self.exterior_dtn(z)?;
        let sum = w + &u * ext;
        Ok(&u * checked_inverse(&sum, SsfError::SingularFactor { z })?)
    }

    pub fn evaluator(&self, with_potential: bool) -> DecoupledEvaluator<'_> {
        DecoupledEvaluator { model: self, with_potential }
    }

    /// Dirichlet eigenvalues of the interior operator strictly below `lambda`.
    pub fn dirichlet_counting(&self, with_potential: bool, lambda: f64) -> Result<usize> {
        let theta = shooting::prufer_angle(self.interior(with_potential), lambda, 0.0, &self.tol)?;
        Ok(shooting::angle_count(theta, std::f64::consts::PI))
    }

    /// Eigenvalues strictly below `lambda` of the operator on the whole line.
    /// All of them are negative, so for `λ ≥ 0` this is the bound-state count.
    pub fn whole_line_counting(&self, with_potential: bool, lambda: f64) -> Result<usize> {
        let kappa = (-lambda).max(0.0).sqrt();
        let theta0 = 1f64.atan2(kappa);
        let target = 1f64.atan2(-kappa);
        let theta = shooting::prufer_angle(self.interior(with_potential), lambda.min(0.0), theta0, &self.tol)?;
        Ok(shooting::angle_count(theta, target))
    }

    fn boundary_value(&self, lambda: f64, sched: &EpsilonSchedule, branch: Branch) -> Result<BoundaryValue> {
        let bv = sched.extrapolate(lambda, |eps| {
            let z = c(lambda, eps);
            let free = self.inverse_dtn_sum(z, false)?;
            let pert = self.inverse_dtn_sum(z, true)?;
            Ok(im_trace_log_value(free, z, branch)? - im_trace_log_value(pert, z, branch)?)
        })?;
        let interior = self.dirichlet_counting(false, lambda)? as f64 - self.dirichlet_counting(true, lambda)? as f64;
        Ok(BoundaryValue { value: bv.value + interior, stable: bv.stable })
    }

    /// ξ = ξ_A − ξ_B + N(λ, A₊) − N(λ, B₊), where ξ_A and ξ_B are the
    /// boundary limits of (1/π) tr Im log 𝔑 and (1/π) tr Im log 𝔑_V and the
    /// last two terms count interior Dirichlet eigenvalues.
    pub fn ssf(&self, grid: &[f64], sched: &EpsilonSchedule) -> Result<SsfGrid> {
        self.ssf_with(grid, sched, Execution::default())
    }

    pub fn ssf_with(&self, grid: &[f64], sched: &EpsilonSchedule, exec: Execution) -> Result<SsfGrid> {
        validate_grid(grid)?;
        let values = exec::try_map(grid, exec, |&l| self.boundary_value(l, sched, Branch::STANDARD))?;
        Ok(SsfGrid::from_values(grid, &values, sched))
    }

    pub fn ssf_value(&self, lambda: f64, sched: &EpsilonSchedule) -> Result<f64> {
        Ok(self.boundary_value(lambda, sched, Branch::STANDARD)?.value)
    }

    /// tr((B − z)⁻¹ − (A − z)⁻¹) for the three-point finite-difference
    /// Laplacian on `[−half_width, half_width]` with Dirichlet walls.
    pub fn finite_difference_trace(&self, z: Complex64, half_width: f64, step: f64) -> Result<Complex64> {
        if !(half_width > self.cutoff) || !(step > 0.0) || step >= half_width {
            return Err(SsfError::InvalidInput("the box must contain the support and the step must be positive".into()));
        }
        let n = (2.0 * half_width / step).round() as usize;
        let h = 2.0 * half_width / n as f64;
        let diag = 2.0 / (h * h);
        let off2 = 1.0 / (h * h * h * h);
        // With pivots p_k of T − z, tr (T − z)⁻¹ = −Σ p_k′ / p_k.
        let trace = |pot: &dyn Fn(f64) -> f64| -> Result<Complex64> {
            let mut p = c(0.0, 0.0);
            let mut dp = c(0.0, 0.0);
            let mut total = c(0.0, 0.0);
            for k in 1..n {
                let x = -half_width + h * k as f64;
                let d = c(diag + pot(x), 0.0) - z;
                let (np, ndp) = if k == 1 { (d, c(-1.0, 0.0)) } else { (d - off2 / p, c(-1.0, 0.0) + dp * off2 / (p * p)) };
                if np.norm() == 0.0 {
                    return Err(SsfError::SpectrumHit { z, distance: 0.0 });
                }
                p = np;
                dp = ndp;
                total -= dp / p;
            }
            Ok(total)
        };
        let b = trace(&|x| self.potential_at(x))?;
        let a = trace(&|_| 0.0)?;
        Ok(b - a)
    }
}

pub struct DecoupledEvaluator<'a> {
    model: &'a DecoupledLineModel,
    with_potential: bool,
}

impl NevanlinnaFunction for DecoupledEvaluator<'_> {
    fn dim(&self) -> usize {
        2
    }
    fn evaluate(&self, z: Complex64) -> Result<CMat> {
        self.model.inverse_dtn_sum(z, self.with_potential)
    }
}

/// `(D_int + D_ext)⁻¹` from an explicit interior DtN matrix.
pub fn inverse_from_dtn(interior: &CMat, exterior: Complex64) -> Result<CMat> {
    let sum = interior + identity(interior.nrows()) * exterior;
    checked_inverse(&sum, SsfError::SingularFactor { z: exterior })
}
