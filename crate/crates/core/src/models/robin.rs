//! Robin realizations of `−u″ + a u` on an interval, compared through the
//! Neumann-to-Dirichlet matrix of the two boundary points.
//!
//! Boundary data of a solution are the Dirichlet values `(u(0), u(L))` and the
//! outward Neumann values `(−u′(0), u′(L))`. The Robin condition with
//! coefficients `b` reads `Neumann = diag(b) · Dirichlet`.

use num_complex::Complex64;

use super::shooting::{self, FundamentalSystem, MeshFunction, OdeTolerance};
use super::{checked_inverse, checked_inverse_rel, im_trace_log_value, SHOOTING_SINGULAR};
use crate::error::{Result, SsfError};
use crate::exec::{self, Execution};
use crate::linalg::{c, CMat};
use crate::nevlog::{Branch, EpsilonSchedule, NevanlinnaFunction};
use crate::ssf::{validate_grid, SsfGrid};

/// Selects one of the three Robin realizations of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RobinCondition {
    Beta0,
    Beta1,
    Reference,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobinIntervalModel {
    potential: MeshFunction,
    beta0: [f64; 2],
    beta1: [f64; 2],
    beta_ref: f64,
    tol: OdeTolerance,
}

impl RobinIntervalModel {
    /// The interval is the mesh of `potential`.
    pub fn new(potential: MeshFunction, beta0: [f64; 2], beta1: [f64; 2], beta_ref: f64) -> Result<Self> {
        if beta0.iter().chain(&beta1).chain([&beta_ref]).any(|b| !b.is_finite()) {
            return Err(SsfError::InvalidInput("Robin coefficients must be finite".into()));
        }
        for (name, b) in [("beta0", beta0), ("beta1", beta1)] {
            if b.iter().any(|&x| !(beta_ref - x > 0.0)) {
                return Err(SsfError::InvariantViolation(format!(
                    "beta_ref = {beta_ref} must exceed every entry of {name} = {b:?}"
                )));
            }
        }
        Ok(Self { potential, beta0, beta1, beta_ref, tol: OdeTolerance::default() })
    }

    /// `a ≡ 0` on `(0, length)`.
    pub fn free(length: f64, beta0: [f64; 2], beta1: [f64; 2], beta_ref: f64) -> Result<Self> {
        Self::new(MeshFunction::constant(0.0, length, 0.0)?, beta0, beta1, beta_ref)
    }

    pub fn potential(&self) -> &MeshFunction {
        &self.potential
    }

    pub fn length(&self) -> f64 {
        self.potential.end() - self.potential.start()
    }

    pub fn beta0(&self) -> [f64; 2] {
        self.beta0
    }

    pub fn beta1(&self) -> [f64; 2] {
        self.beta1
    }

    pub fn beta_ref(&self) -> f64 {
        self.beta_ref
    }

    pub fn coefficients(&self, cond: RobinCondition) -> [f64; 2] {
        match cond {
            RobinCondition::Beta0 => self.beta0,
            RobinCondition::Beta1 => self.beta1,
            RobinCondition::Reference => [self.beta_ref; 2],
        }
    }

    fn fundamental(&self, z: Complex64) -> Result<FundamentalSystem> {
        shooting::fundamental_system(&self.potential, z, &self.tol)
    }

    /// Dirichlet data `U` and outward Neumann data `V` of the fundamental
    /// system, one solution per column.
    pub fn boundary_data(&self, z: Complex64) -> Result<(CMat, CMat)> {
        let f = self.fundamental(z)?;
        let one = c(1.0, 0.0);
        let zero = c(0.0, 0.0);
        let u = CMat::from_row_slice(2, 2, &[one, zero, f.value[0], f.value[1]]);
        let v = CMat::from_row_slice(2, 2, &[zero, -one, f.derivative[0], f.derivative[1]]);
        Ok((u, v))
    }

    /// Neumann-to-Dirichlet matrix 𝒩(z) = U V⁻¹.
    pub fn ntd(&self, z: Complex64) -> Result<CMat> {
        let (u, v) = self.boundary_data(z)?;
        let det = v[(0, 0)] * v[(1, 1)] - v[(0, 1)] * v[(1, 0)];
        let scale = crate::linalg::max_abs(&v).max(1.0);
        if !(det.norm() > SHOOTING_SINGULAR * scale * scale) {
            return Err(SsfError::NeumannEigenvalueHit { z });
        }
        Ok(u * checked_inverse_rel(&v, SHOOTING_SINGULAR, SsfError::NeumannEigenvalueHit { z })?)
    }

    fn weyl_from_data(&self, cond: RobinCondition, u: &CMat, v: &CMat, z: Complex64) -> Result<CMat> {
        let bp = self.coefficients(cond);
        let scaled = |b: [f64; 2]| {
            let mut m = u.clone();
            for (row, &s) in b.iter().enumerate() {
                m.row_mut(row).scale_mut(s);
            }
            m - v
        };
        let denom = checked_inverse(&scaled([self.beta_ref; 2]), SsfError::SingularFactor { z })?;
        let mut m = scaled(bp) * denom;
        for (row, &b) in bp.iter().enumerate() {
            m.row_mut(row).scale_mut(1.0 / (self.beta_ref - b));
        }
        Ok(m)
    }

    /// 𝓜_p(z) = diag(β − β_p)⁻¹ (β_p 𝒩 − I)(β 𝒩 − I)⁻¹, evaluated as
    /// diag(β − β_p)⁻¹ (β_p U − V)(β U − V)⁻¹ so Neumann eigenvalues are harmless.
    pub fn weyl(&self, cond: RobinCondition, z: Complex64) -> Result<CMat> {
        if cond == RobinCondition::Reference {
            return Err(SsfError::InvalidInput("the Weyl function is defined for beta0 and beta1 only".into()));
        }
        let (u, v) = self.boundary_data(z)?;
        self.weyl_from_data(cond, &u, &v, z)
    }

    pub fn weyl_function(&self, cond: RobinCondition) -> RobinWeyl<'_> {
        RobinWeyl { model: self, cond }
    }

    /// det(diag(b) U − V) at real λ; its zeros are the eigenvalues.
    pub fn secular_determinant(&self, cond: RobinCondition, lambda: f64) -> Result<f64> {
        let b = self.coefficients(cond);
        let f = self.fundamental(c(lambda, 0.0))?;
        let (y1, y2) = (f.value[0].re, f.value[1].re);
        let (d1, d2) = (f.derivative[0].re, f.derivative[1].re);
        Ok(b[0] * (b[1] * y2 - d2) - (b[1] * y1 - d1))
    }

    /// Number of eigenvalues strictly below `lambda`, by Prüfer angle.
    pub fn counting(&self, cond: RobinCondition, lambda: f64) -> Result<usize> {
        let b = self.coefficients(cond);
        let theta0 = 1f64.atan2(-b[0]);
        let target = 1f64.atan2(b[1]);
        let theta = shooting::prufer_angle(&self.potential, lambda, theta0, &self.tol)?;
        Ok(shooting::angle_count(theta, target))
    }

    fn lower_bound(&self, cond: RobinCondition) -> Result<f64> {
        let b = self.coefficients(cond);
        let big = b.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        let mut lo = self.potential.min() - 1.0 - 4.0 * big * big;
        for _ in 0..60 {
            if self.counting(cond, lo)? == 0 {
                return Ok(lo);
            }
            lo = 2.0 * lo - 1.0;
        }
        Err(SsfError::RootFindingFailure("no eigenvalue-free lower bound found".into()))
    }

    /// All eigenvalues `≤ lambda_max`, each localized to 1e-9: Prüfer counts
    /// isolate one root per bracket, bisection on the secular determinant
    /// pins it down.
    pub fn eigenvalues(&self, cond: RobinCondition, lambda_max: f64) -> Result<Vec<f64>> {
        if !lambda_max.is_finite() {
            return Err(SsfError::InvalidInput("lambda_max must be finite".into()));
        }
        let top = lambda_max + 1e-9 * (1.0 + lambda_max.abs());
        let total = self.counting(cond, top)?;
        let mut found = Vec::with_capacity(total);
        let mut floor = self.lower_bound(cond)?;
        for k in 0..total {
            let (mut lo, mut hi) = (floor, top);
            for _ in 0..200 {
                let n_lo = self.counting(cond, lo)?;
                let n_hi = self.counting(cond, hi)?;
                if n_lo == k && n_hi == k + 1 {
                    break;
                }
                let mid = 0.5 * (lo + hi);
                if self.counting(cond, mid)? > k {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let root = self.bisect_determinant(cond, lo, hi)?;
            found.push(root);
            floor = root + 1e-9;
        }
        Ok(found)
    }

    fn bisect_determinant(&self, cond: RobinCondition, mut lo: f64, mut hi: f64) -> Result<f64> {
        let mut f_lo = self.secular_determinant(cond, lo)?;
        let f_hi = self.secular_determinant(cond, hi)?;
        if f_lo == 0.0 {
            return Ok(lo);
        }
        if f_hi == 0.0 {
            return Ok(hi);
        }
        if f_lo.signum() == f_hi.signum() {
            return Err(SsfError::RootFindingFailure(format!("secular determinant keeps its sign on [{lo}, {hi}]")));
        }
        while hi - lo > 2e-10 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let f_mid = self.secular_determinant(cond, mid)?;
            if f_mid == 0.0 {
                return Ok(mid);
            }
            if f_mid.signum() == f_lo.signum() {
                lo = mid;
                f_lo = f_mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// N(λ, A_β₀) − N(λ, A_β₁).
    pub fn counting_difference(&self, lambda: f64) -> Result<i64> {
        Ok(self.counting(RobinCondition::Beta0, lambda)? as i64 - self.counting(RobinCondition::Beta1, lambda)? as i64)
    }

    fn boundary_value(&self, lambda: f64, sched: &EpsilonSchedule, branch: Branch) -> Result<crate::nevlog::BoundaryValue> {
        sched.extrapolate(lambda, |eps| {
            let z = c(lambda, eps);
            let (u, v) = self.boundary_data(z)?;
            let m1 = self.weyl_from_data(RobinCondition::Beta1, &u, &v, z)?;
            let m0 = self.weyl_from_data(RobinCondition::Beta0, &u, &v, z)?;
            Ok(im_trace_log_value(m1, z, branch)? - im_trace_log_value(m0, z, branch)?)
        })
    }

    /// ξ(λ) = lim (1/π) tr Im(log 𝓜₁ − log 𝓜₀)(λ + iε), the spectral shift
    /// function of `{A_β₀, A_β₁}` vanishing below the reference spectrum.
    pub fn ssf(&self, grid: &[f64], sched: &EpsilonSchedule) -> Result<SsfGrid> {
        self.ssf_with(grid, sched, Execution::default())
    }

    pub fn ssf_with(&self, grid: &[f64], sched: &EpsilonSchedule, exec: Execution) -> Result<SsfGrid> {
        validate_grid(grid)?;
        let values = exec::try_map(grid, exec, |&l| self.boundary_value(l, sched, Branch::STANDARD))?;
        Ok(SsfGrid::from_values(grid, &values, sched))
    }

    /// Single boundary-limit value, for jump refinement.
    pub fn ssf_value(&self, lambda: f64, sched: &EpsilonSchedule) -> Result<f64> {
        Ok(self.boundary_value(lambda, sched, Branch::STANDARD)?.value)
    }
}

/// 𝓜_p(z) = diag(β − β_p)⁻¹ (β_p 𝒩 − I)(β 𝒩 − I)⁻¹ from a given 𝒩.
pub fn weyl_from_ntd(ntd: &CMat, beta_p: [f64; 2], beta_ref: f64) -> Result<CMat> {
    let mut left = ntd.clone();
    let mut right = ntd.scale(beta_ref);
    for (row, &b) in beta_p.iter().enumerate() {
        left.row_mut(row).scale_mut(b);
    }
    for k in 0..2 {
        left[(k, k)] -= 1.0;
        right[(k, k)] -= 1.0;
    }
    let z = c(f64::NAN, f64::NAN);
    let mut m = left * checked_inverse(&right, SsfError::SingularFactor { z })?;
    for (row, &b) in beta_p.iter().enumerate() {
        if !(beta_ref - b > 0.0) {
            return Err(SsfError::InvariantViolation(format!("beta_ref = {beta_ref} must exceed {b}")));
        }
        m.row_mut(row).scale_mut(1.0 / (beta_ref - b));
    }
    Ok(m)
}

pub struct RobinWeyl<'a> {
    model: &'a RobinIntervalModel,
    cond: RobinCondition,
}

impl NevanlinnaFunction for RobinWeyl<'_> {
    fn dim(&self) -> usize {
        2
    }
    fn evaluate(&self, z: Complex64) -> Result<CMat> {
        self.model.weyl(self.cond, z)
    }
}
