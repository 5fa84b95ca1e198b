//! δ-interaction of strength α at the origin of the line: the pair
//! `{H, H_{δ,α}}` with `H = −d²/dx²` and `H_{δ,α}` given by the form
//! `∫|u′|² − α|u(0)|²`.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::{im_trace_log_value, sqrt_upper};
use crate::error::{Result, SsfError};
use crate::exec::{self, Execution};
use crate::linalg::{c, CMat};
use crate::nevlog::{Branch, BoundaryValue, EpsilonSchedule, NevanlinnaFunction};
use crate::ssf::{validate_grid, SsfGrid};

/// 𝓔(z) = (𝓓_i(z) + 𝓓_e(z))⁻¹ = i / (2√z), Im √z > 0.
pub fn single_layer(z: Complex64) -> Result<Complex64> {
    Ok(Complex64::i() / (2.0 * sqrt_upper(z)?))
}

/// Which representation of ξ to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeltaPath {
    /// (1/π) Im log(𝓔 − 1/α); requires α < 0.
    Direct,
    /// (1/π) Im(log 𝓜_α − log 𝓜₀) through the comparison strength c.
    Comparison,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaPointModel {
    alpha: f64,
    comparison_c: Option<f64>,
}

impl DeltaPointModel {
    pub fn new(alpha: f64, comparison_c: Option<f64>) -> Result<Self> {
        if !alpha.is_finite() || alpha == 0.0 {
            return Err(SsfError::InvalidInput(format!("alpha must be finite and nonzero, got {alpha}")));
        }
        if let Some(cc) = comparison_c {
            if !(cc > alpha && cc > 0.0 && cc.is_finite()) {
                return Err(SsfError::InvariantViolation(format!(
                    "comparison_c = {cc} must be positive and exceed alpha = {alpha}"
                )));
            }
        }
        Ok(Self { alpha, comparison_c })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn comparison_c(&self) -> Option<f64> {
        self.comparison_c
    }

    /// 𝓔(z) − 1/α.
    pub fn direct_weyl(&self, z: Complex64) -> Result<Complex64> {
        if self.alpha >= 0.0 {
            return Err(SsfError::SignPathMismatch { alpha: self.alpha });
        }
        Ok(single_layer(z)? - 1.0 / self.alpha)
    }

    fn comparison(&self) -> Result<f64> {
        self.comparison_c
            .ok_or_else(|| SsfError::InvalidInput("the comparison path needs comparison_c".into()))
    }

    /// (c − s)⁻¹ (s𝓔 − 1)(c𝓔 − 1)⁻¹; `s = α` gives 𝓜_α and `s = 0` gives 𝓜₀.
    pub fn comparison_weyl(&self, strength: f64, z: Complex64) -> Result<Complex64> {
        let cc = self.comparison()?;
        let e = single_layer(z)?;
        let denom = cc * e - 1.0;
        if denom.norm() < 1e-14 {
            return Err(SsfError::SingularFactor { z });
        }
        Ok((strength * e - 1.0) / denom / (cc - strength))
    }

    pub fn evaluator(&self, which: DeltaFunction) -> DeltaEvaluator {
        DeltaEvaluator { model: *self, which }
    }

    fn sample(&self, path: DeltaPath, z: Complex64, branch: Branch) -> Result<f64> {
        let scalar = |w: Complex64| CMat::from_element(1, 1, w);
        match path {
            DeltaPath::Direct => im_trace_log_value(scalar(self.direct_weyl(z)?), z, branch),
            DeltaPath::Comparison => {
                let ma = self.comparison_weyl(self.alpha, z)?;
                let m0 = self.comparison_weyl(0.0, z)?;
                Ok(im_trace_log_value(scalar(ma), z, branch)? - im_trace_log_value(scalar(m0), z, branch)?)
            }
        }
    }

    fn boundary_value(&self, path: DeltaPath, lambda: f64, sched: &EpsilonSchedule) -> Result<BoundaryValue> {
        if path == DeltaPath::Direct && self.alpha >= 0.0 {
            return Err(SsfError::SignPathMismatch { alpha: self.alpha });
        }
        if path == DeltaPath::Comparison {
            self.comparison()?;
        }
        sched.extrapolate(lambda, |eps| self.sample(path, c(lambda, eps), Branch::STANDARD))
    }

    pub fn ssf(&self, grid: &[f64], sched: &EpsilonSchedule, path: DeltaPath) -> Result<SsfGrid> {
        self.ssf_with(grid, sched, path, Execution::default())
    }

    pub fn ssf_with(&self, grid: &[f64], sched: &EpsilonSchedule, path: DeltaPath, exec: Execution) -> Result<SsfGrid> {
        validate_grid(grid)?;
        let values = exec::try_map(grid, exec, |&l| self.boundary_value(path, l, sched))?;
        Ok(SsfGrid::from_values(grid, &values, sched))
    }

    /// Closed-form ξ = N(λ, H) − N(λ, H_{δ,α}): the scattering phase
    /// `−sign(α) arctan(|α| / 2√λ) / π` above zero and `−1` between the bound
    /// state `−α²/4` and zero when α > 0.
    pub fn closed_form(&self, lambda: f64) -> f64 {
        let a = self.alpha;
        if lambda > 0.0 {
            -a.signum() * (a.abs() / (2.0 * lambda.sqrt())).atan() / PI
        } else if a > 0.0 && lambda > -a * a / 4.0 {
            -1.0
        } else {
            0.0
        }
    }

    /// tr((H_{δ,α} − z)⁻¹ − (H − z)⁻¹) = α𝓔′(z) / (1 − α𝓔(z)), from the
    /// rank-one resolvent difference with kernel `G(x, 0)G(0, y)`.
    pub fn resolvent_trace(&self, z: Complex64) -> Result<Complex64> {
        let k = sqrt_upper(z)?;
        let e = Complex64::i() / (2.0 * k);
        let de = -Complex64::i() / (4.0 * k * k * k);
        Ok(self.alpha * de / (1.0 - self.alpha * e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeltaFunction {
    /// 𝓔 − 1/α.
    Direct,
    /// 𝓜_α.
    ComparisonAlpha,
    /// 𝓜₀.
    ComparisonZero,
}

pub struct DeltaEvaluator {
    model: DeltaPointModel,
    which: DeltaFunction,
}

impl NevanlinnaFunction for DeltaEvaluator {
    fn dim(&self) -> usize {
        1
    }
    fn evaluate(&self, z: Complex64) -> Result<CMat> {
        let w = match self.which {
            DeltaFunction::Direct => self.model.direct_weyl(z)?,
            DeltaFunction::ComparisonAlpha => self.model.comparison_weyl(self.model.alpha, z)?,
            DeltaFunction::ComparisonZero => self.model.comparison_weyl(0.0, z)?,
        };
        Ok(CMat::from_element(1, 1, w))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{self, QuadConfig};
    use crate::ssf::linspace;
    use proptest::prelude::*;

    #[test]
    fn single_layer_values() {
        assert!((single_layer(c(-1.0, 0.0)).unwrap() - 0.5).norm() < 1e-15);
        assert!((single_layer(c(-4.0, 0.0)).unwrap() - 0.25).norm() < 1e-15);
        assert!((single_layer(c(1.0, 1e-8)).unwrap() - c(0.0, 0.5)).norm() < 1e-7);
        assert!(matches!(single_layer(c(1.0, 0.0)), Err(SsfError::BranchViolation { .. })));
    }

    #[test]
    fn single_layer_from_decaying_exponentials() {
        // u = e^{ik|x|}: outward derivatives from both sides sum to −2ik.
        let z = c(-2.5, 0.3);
        let k = sqrt_upper(z).unwrap();
        let h = 1e-6;
        let u = |x: f64| (Complex64::i() * k * x.abs()).exp();
        let inner = (u(0.0) - u(-h)) / h;
        let outer = -(u(h) - u(0.0)) / h;
        assert!((1.0 / (inner + outer) - single_layer(z).unwrap()).norm() < 1e-5);
    }

    #[test]
    fn validation() {
        assert!(DeltaPointModel::new(0.0, None).is_err());
        assert!(matches!(DeltaPointModel::new(2.0, Some(1.0)), Err(SsfError::InvariantViolation(_))));
        let m = DeltaPointModel::new(1.0, None).unwrap();
        let err = m.ssf(&[1.0], &EpsilonSchedule::default(), DeltaPath::Direct).unwrap_err();
        assert_eq!(err, SsfError::SignPathMismatch { alpha: 1.0 });
        assert!(m.ssf(&[1.0], &EpsilonSchedule::default(), DeltaPath::Comparison).is_err());
    }

    #[test]
    fn direct_path_examples() {
        let m = DeltaPointModel::new(-2.0, None).unwrap();
        let s = m.ssf(&[-1.0, 1.0], &EpsilonSchedule::default(), DeltaPath::Direct).unwrap();
        assert!(s.xi()[0].abs() < 1e-12);
        assert!((s.xi()[1] - 0.25).abs() < 1e-8);
        // near the threshold the schedule has to shrink with λ
        let tiny = m.ssf(&[1e-6], &EpsilonSchedule::default().scaled(1e-4), DeltaPath::Direct).unwrap();
        assert!((tiny.xi()[0] - 0.5).abs() < 2e-3, "{}", tiny.xi()[0]);
    }

    #[test]
    fn direct_path_matches_closed_form() {
        let m = DeltaPointModel::new(-2.0, None).unwrap();
        let grid = linspace(0.01, 25.0, 200);
        let s = m.ssf(&grid, &EpsilonSchedule::default(), DeltaPath::Direct).unwrap();
        for (l, x) in s.points() {
            assert!((x - (1.0 / l.sqrt()).atan() / PI).abs() < 1e-6, "λ = {l}");
        }
    }

    #[test]
    fn comparison_path_agrees_with_direct_path() {
        let m = DeltaPointModel::new(-2.0, Some(1.0)).unwrap();
        let mut grid = linspace(0.01, 25.0, 120);
        grid.insert(0, -0.1);
        grid.insert(0, -3.0);
        let sched = EpsilonSchedule::default();
        let a = m.ssf(&grid, &sched, DeltaPath::Direct).unwrap();
        let b = m.ssf(&grid, &sched, DeltaPath::Comparison).unwrap();
        let shift = b.xi().last().unwrap() - a.xi().last().unwrap();
        assert!(shift.abs() < 1e-6, "anchor shift {shift}");
        for ((l, x), y) in a.points().zip(b.xi()) {
            assert!((x - y).abs() < 1e-4, "λ = {l}: {x} vs {y}");
        }
    }

    #[test]
    fn attractive_coupling_through_comparison() {
        let m = DeltaPointModel::new(2.0, Some(3.0)).unwrap();
        let grid = [-2.0, -0.5, 0.5, 4.0];
        let s = m.ssf(&grid, &EpsilonSchedule::default(), DeltaPath::Comparison).unwrap();
        for (l, x) in s.points() {
            assert!((x - m.closed_form(l)).abs() < 1e-6, "λ = {l}: {x} vs {}", m.closed_form(l));
        }
    }

    fn trace_rhs_closed_form(m: &DeltaPointModel, z: Complex64) -> Complex64 {
        // −∫ ξ(λ)(λ − z)^{-2} dλ with λ = t² on (0, ∞) and the bound-state plateau.
        let cfg = QuadConfig::default();
        let pos = quad::integrate(
            |s: f64| {
                let t = s / (1.0 - s);
                let l = t * t;
                Ok((c(l, 0.0) - z).powi(-2) * m.closed_form(l) * 2.0 * t / (1.0 - s).powi(2))
            },
            0.0,
            1.0,
            &cfg,
        )
        .unwrap()
        .value;
        let a = m.alpha();
        let neg = if a > 0.0 {
            // ∫_{−α²/4}^{0} −(λ − z)^{-2} dλ
            let lo = -a * a / 4.0;
            (-z).inv() - (c(lo, 0.0) - z).inv()
        } else {
            c(0.0, 0.0)
        };
        -(pos + neg)
    }

    #[test]
    fn closed_form_satisfies_trace_formula() {
        for alpha in [-2.0, -0.5, 1.0, 3.0] {
            let m = DeltaPointModel::new(alpha, None).unwrap();
            for z in [c(0.0, 1.0), c(-1.0, 0.0), c(2.0, -0.5)] {
                if alpha > 0.0 && z.im == 0.0 {
                    continue;
                }
                let lhs = m.resolvent_trace(z).unwrap();
                let rhs = trace_rhs_closed_form(&m, z);
                assert!((lhs - rhs).norm() < 1e-8, "α = {alpha}, z = {z}: {lhs} vs {rhs}");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]

        #[test]
        fn evaluators_are_nevanlinna(re in -20.0f64..20.0, im in 1e-3f64..10.0, alpha in -4.0f64..-0.1) {
            let m = DeltaPointModel::new(alpha, Some(1.0)).unwrap();
            let z = c(re, im);
            for which in [DeltaFunction::Direct, DeltaFunction::ComparisonAlpha, DeltaFunction::ComparisonZero] {
                let e = m.evaluator(which);
                let w = e.evaluate(z).unwrap()[(0, 0)];
                let r = e.evaluate(z.conj()).unwrap()[(0, 0)];
                prop_assert!(w.im >= -1e-12);
                prop_assert!((r - w.conj()).norm() < 1e-12);
            }
        }
    }
}
