//! Spectral shift functions on real grids and the trace-formula check.
//!
//! Orientation: ξ = N(·, A) − N(·, B) for finite pairs, which is the sign for which
//! `tr((B − z)^{-m} − (A − z)^{-m}) = −m ∫ ξ(λ)(λ − z)^{-m-1} dλ` holds.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Result, SsfError};
use crate::exec::{self, Execution};
use crate::linalg::{self, c};
use crate::nevlog::{self, BoundaryValue, Branch, EpsilonSchedule, NevanlinnaFunction};
use crate::opcore::HermitianOperator;
use crate::quad::{self, QuadConfig};
use crate::triple::PerturbationPair;

#[derive(Debug, Clone, PartialEq)]
pub struct SsfGrid {
    lambda: Vec<f64>,
    xi: Vec<f64>,
    eps_schedule: EpsilonSchedule,
    power: u32,
    basis_seed: u64,
    unresolved: Vec<usize>,
}

fn check_power(power: u32) -> Result<()> {
    if power.is_multiple_of(2) {
        return Err(SsfError::InvalidInput(format!("power must be odd, got {power}")));
    }
    Ok(())
}

/// Strictly increasing grid check shared by all grid producers.
pub fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(SsfError::InvalidInput("grid is empty".into()));
    }
    if grid.iter().any(|x| !x.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SsfError::InvalidInput("grid must be finite and strictly increasing".into()));
    }
    Ok(())
}

/// `points` equispaced values on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / (points - 1) as f64;
    (0..points).map(|k| if k + 1 == points { hi } else { lo + step * k as f64 }).collect()
}

impl SsfGrid {
    pub fn new(lambda: Vec<f64>, xi: Vec<f64>, eps_schedule: EpsilonSchedule, power: u32) -> Result<Self> {
        if lambda.len() != xi.len() {
            return Err(SsfError::GridMismatch(format!("{} lambda values but {} xi values", lambda.len(), xi.len())));
        }
        validate_grid(&lambda)?;
        check_power(power)?;
        Ok(Self { lambda, xi, eps_schedule, power, basis_seed: 0, unresolved: Vec::new() })
    }

    pub(crate) fn from_values(lambda: &[f64], values: &[BoundaryValue], sched: &EpsilonSchedule) -> Self {
        Self {
            lambda: lambda.to_vec(),
            xi: values.iter().map(|v| v.value).collect(),
            eps_schedule: sched.clone(),
            power: 1,
            basis_seed: 0,
            unresolved: values.iter().enumerate().filter(|(_, v)| !v.stable).map(|(k, _)| k).collect(),
        }
    }

    pub fn with_power(mut self, power: u32) -> Result<Self> {
        check_power(power)?;
        self.power = power;
        Ok(self)
    }

    pub fn with_basis_seed(mut self, seed: u64) -> Self {
        self.basis_seed = seed;
        self
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    pub fn eps_schedule(&self) -> &EpsilonSchedule {
        &self.eps_schedule
    }

    pub fn power(&self) -> u32 {
        self.power
    }

    pub fn basis_seed(&self) -> u64 {
        self.basis_seed
    }

    /// Grid indices whose value is a raw finest-ε sample.
    pub fn unresolved(&self) -> &[usize] {
        &self.unresolved
    }

    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.lambda.iter().copied().zip(self.xi.iter().copied())
    }

    /// Piecewise-linear interpolant, zero outside the grid.
    pub fn value_at(&self, x: f64) -> f64 {
        let n = self.lambda.len();
        if x < self.lambda[0] || x > self.lambda[n - 1] {
            return 0.0;
        }
        let k = self.lambda.partition_point(|&l| l <= x);
        if k == 0 {
            return self.xi[0];
        }
        if k == n {
            return self.xi[n - 1];
        }
        let (l0, l1) = (self.lambda[k - 1], self.lambda[k]);
        let t = (x - l0) / (l1 - l0);
        self.xi[k - 1] * (1.0 - t) + self.xi[k] * t
    }

    fn insert(&mut self, x: f64, value: f64) {
        let k = self.lambda.partition_point(|&l| l < x);
        if k < self.lambda.len() && self.lambda[k] == x {
            return;
        }
        for u in self.unresolved.iter_mut() {
            if *u >= k {
                *u += 1;
            }
        }
        self.lambda.insert(k, x);
        self.xi.insert(k, value);
    }

    pub fn map_values(&self, f: impl Fn(f64, f64) -> f64) -> Self {
        Self { xi: self.points().map(|(l, x)| f(l, x)).collect(), ..self.clone() }
    }
}

pub(crate) fn boundary_limit_branch<N: NevanlinnaFunction + ?Sized>(
    m: &N,
    grid: &[f64],
    sched: &EpsilonSchedule,
    exec: Execution,
    branch: Branch,
) -> Result<SsfGrid> {
    validate_grid(grid)?;
    let values = exec::try_map(grid, exec, |&lambda| boundary_point(m, lambda, sched, branch))?;
    Ok(SsfGrid::from_values(grid, &values, sched))
}

fn boundary_point<N: NevanlinnaFunction + ?Sized>(
    m: &N,
    lambda: f64,
    sched: &EpsilonSchedule,
    branch: Branch,
) -> Result<BoundaryValue> {
    sched.extrapolate(lambda, |eps| Ok(nevlog::im_trace_log(m, c(lambda, eps), branch)? / PI))
}

/// ξ(λ) = lim_{ε↓0} (1/π) tr Im log M(λ + iε) on every grid point.
pub fn ssf_boundary_limit<N: NevanlinnaFunction + ?Sized>(m: &N, grid: &[f64], sched: &EpsilonSchedule) -> Result<SsfGrid> {
    ssf_boundary_limit_with(m, grid, sched, Execution::default())
}

pub fn ssf_boundary_limit_with<N: NevanlinnaFunction + ?Sized>(
    m: &N,
    grid: &[f64],
    sched: &EpsilonSchedule,
    exec: Execution,
) -> Result<SsfGrid> {
    boundary_limit_branch(m, grid, sched, exec, Branch::STANDARD)
}

/// N(λ, A) − N(λ, B).
pub fn ssf_counting_oracle(a_op: &HermitianOperator, b_op: &HermitianOperator, lambda: f64) -> i64 {
    a_op.counting_function(lambda) as i64 - b_op.counting_function(lambda) as i64
}

/// Pointwise ξ_B − ξ_A.
pub fn ssf_difference(xi_b: &SsfGrid, xi_a: &SsfGrid) -> Result<SsfGrid> {
    if xi_b.lambda != xi_a.lambda {
        return Err(SsfError::GridMismatch("lambda grids differ".into()));
    }
    if xi_b.power != xi_a.power {
        return Err(SsfError::GridMismatch(format!("powers differ: {} vs {}", xi_b.power, xi_a.power)));
    }
    let mut unresolved: Vec<usize> = xi_b.unresolved.iter().chain(&xi_a.unresolved).copied().collect();
    unresolved.sort_unstable();
    unresolved.dedup();
    Ok(SsfGrid {
        xi: xi_b.xi.iter().zip(&xi_a.xi).map(|(b, a)| b - a).collect(),
        unresolved,
        ..xi_b.clone()
    })
}

/// ξ of a pair at one point: the Weyl-function limit for T ≻ 0, otherwise
/// the difference through the comparison operator `C = A − sGG*`.
pub struct PairSsf {
    direct: Option<PerturbationPair>,
    comparison: Option<(PerturbationPair, PerturbationPair)>,
}

impl PairSsf {
    pub fn new(pair: &PerturbationPair) -> Result<Self> {
        if pair.is_t_positive() {
            Ok(Self { direct: Some(pair.clone()), comparison: None })
        } else {
            Ok(Self { direct: None, comparison: Some(pair.comparison_pairs()?) })
        }
    }

    pub fn uses_comparison(&self) -> bool {
        self.comparison.is_some()
    }

    pub(crate) fn point(&self, lambda: f64, sched: &EpsilonSchedule, branch: Branch) -> Result<BoundaryValue> {
        match (&self.direct, &self.comparison) {
            (Some(p), _) => boundary_point(&p.weyl_function(), lambda, sched, branch),
            (None, Some((to_a, to_b))) => {
                let b = boundary_point(&to_b.weyl_function(), lambda, sched, branch)?;
                let a = boundary_point(&to_a.weyl_function(), lambda, sched, branch)?;
                Ok(BoundaryValue { value: b.value - a.value, stable: a.stable && b.stable })
            }
            (None, None) => unreachable!("one path is always set"),
        }
    }

    pub fn grid(&self, grid: &[f64], sched: &EpsilonSchedule, exec: Execution) -> Result<SsfGrid> {
        validate_grid(grid)?;
        let values = exec::try_map(grid, exec, |&l| self.point(l, sched, Branch::STANDARD))?;
        Ok(SsfGrid::from_values(grid, &values, sched))
    }

    pub fn value(&self, lambda: f64, sched: &EpsilonSchedule) -> Result<f64> {
        Ok(self.point(lambda, sched, Branch::STANDARD)?.value)
    }
}

/// ξ for any valid pair, routed by the sign of the coupling.
pub fn ssf_for_pair(pair: &PerturbationPair, grid: &[f64], sched: &EpsilonSchedule, exec: Execution) -> Result<SsfGrid> {
    PairSsf::new(pair)?.grid(grid, sched, exec)
}

/// Locates every jump of ξ larger than `threshold` by bisection down to a
/// bracket of width `min_step`, inserting the evaluated points into the grid.
/// Midpoints are classified by the nearer of the two plateau values. A jump
/// sampled at an intermediate value is bracketed across both adjacent steps.
/// Returns the final brackets `(left, right)`.
pub fn refine_jumps(
    grid: &mut SsfGrid,
    threshold: f64,
    min_step: f64,
    eval: impl Fn(f64) -> Result<f64>,
) -> Result<Vec<(f64, f64)>> {
    let mut jumps = Vec::new();
    let mut k = 0;
    while k + 1 < grid.len() {
        let x = &grid.xi;
        let end = if (x[k + 1] - x[k]).abs() > threshold {
            k + 1
        } else if k + 2 < grid.len()
            && (x[k + 2] - x[k]).abs() > threshold
            && (x[k + 1] - x[k]).abs() > 0.25 * threshold
            && (x[k + 2] - x[k + 1]).abs() > 0.25 * threshold
        {
            k + 2
        } else {
            k += 1;
            continue;
        };
        let (mut lo, mut hi) = (grid.lambda[k], grid.lambda[end]);
        let (v_lo, v_hi) = (grid.xi[k], grid.xi[end]);
        let mut samples = Vec::new();
        while hi - lo > min_step {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let v = eval(mid)?;
            samples.push((mid, v));
            if (v - v_lo).abs() < (v - v_hi).abs() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let span_hi = grid.lambda[end];
        // the shoulders reach into the neighbouring segments unless those are jumps of their own
        let reach_lo = grid.lambda[k.saturating_sub(1)];
        let reach_hi = match grid.xi.get(end + 1) {
            Some(&v) if (v - grid.xi[end]).abs() <= threshold => grid.lambda[end + 1],
            _ => span_hi,
        };
        for (l, v) in samples {
            grid.insert(l, v);
        }
        let mut j = grid.lambda.partition_point(|&l| l < reach_lo);
        while j + 1 < grid.len() && grid.lambda[j] < reach_hi {
            let (l0, l1) = (grid.lambda[j], grid.lambda[j + 1]);
            let mid = 0.5 * (l0 + l1);
            let coarse = (grid.xi[j + 1] - grid.xi[j]).abs() > 0.01 * threshold;
            if coarse && l1 - l0 > min_step && mid > l0 && mid < l1 {
                grid.insert(mid, eval(mid)?);
            } else {
                j += 1;
            }
        }
        jumps.push((lo, hi));
        k = grid.lambda.partition_point(|&l| l < span_hi).max(k + 1);
    }
    Ok(jumps)
}

/// −m ∫ ξ(λ)(λ − z)^{-m-1} dλ over the grid hull with piecewise-linear ξ.
pub fn trace_integral(grid: &SsfGrid, z: Complex64) -> Result<Complex64> {
    let m = grid.power as i32;
    let cfg = QuadConfig { abs_tol: 1e-14, rel_tol: 1e-12, max_intervals: 200 };
    let mut total = Complex64::default();
    for k in 0..grid.len().saturating_sub(1) {
        let (l0, l1) = (grid.lambda[k], grid.lambda[k + 1]);
        let (x0, x1) = (grid.xi[k], grid.xi[k + 1]);
        if x0 == 0.0 && x1 == 0.0 {
            continue;
        }
        let f = |l: f64| -> Result<Complex64> {
            let t = (l - l0) / (l1 - l0);
            let xi = x0 * (1.0 - t) + x1 * t;
            Ok((c(l, 0.0) - z).powi(-(m + 1)) * xi)
        };
        total += quad::integrate(f, l0, l1, &cfg)?.value;
    }
    Ok(total * -(m as f64))
}

/// tr((B − z)^{-m} − (A − z)^{-m}).
pub fn trace_lhs(pair: &PerturbationPair, z: Complex64, power: u32) -> Result<Complex64> {
    let rb = pair.b_op().resolvent_power(z, power as i32)?;
    let ra = pair.a_op().resolvent_power(z, power as i32)?;
    Ok(linalg::trace(&(rb - ra)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceFormulaEntry {
    pub z: Complex64,
    pub lhs: Complex64,
    pub rhs: Complex64,
    pub residual: f64,
}

impl TraceFormulaEntry {
    /// Residual relative to |lhs|, absolute when the lhs vanishes.
    pub fn relative_residual(&self) -> f64 {
        let scale = self.lhs.norm();
        if scale > 1e-8 {
            self.residual / scale
        } else {
            self.residual
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TraceFormulaReport {
    pub z_points: Vec<Complex64>,
    pub lhs: Vec<Complex64>,
    pub rhs: Vec<Complex64>,
    pub residual: Vec<f64>,
}

impl TraceFormulaReport {
    pub fn push(&mut self, entry: TraceFormulaEntry) {
        self.z_points.push(entry.z);
        self.lhs.push(entry.lhs);
        self.rhs.push(entry.rhs);
        self.residual.push(entry.residual);
    }

    pub fn max_residual(&self) -> f64 {
        self.residual.iter().copied().fold(0.0, f64::max)
    }
}

/// Omitted-tail estimate m·sup|ξ|·∫|λ − z|^{-m-1} over parts of `[lo, hi]` the grid misses.
pub fn tail_estimate(grid: &SsfGrid, z: Complex64, lo: f64, hi: f64) -> Result<f64> {
    let m = grid.power as f64;
    let sup = grid.xi.iter().fold(1.0f64, |acc, x| acc.max(x.abs()));
    let weight = |l: f64| -> Result<f64> { Ok((c(l, 0.0) - z).norm().powf(-(m + 1.0))) };
    let cfg = QuadConfig::default();
    let mut total = 0.0;
    let (g0, g1) = (grid.lambda[0], grid.lambda[grid.len() - 1]);
    if lo < g0 {
        total += quad::integrate(weight, lo, g0.min(hi), &cfg)?.value;
    }
    if hi > g1 {
        total += quad::integrate(weight, g1.max(lo), hi, &cfg)?.value;
    }
    Ok(m * sup * total)
}

pub fn trace_formula_residual(
    pair: &PerturbationPair,
    ssf: &SsfGrid,
    z: Complex64,
    tail_bound: f64,
) -> Result<TraceFormulaEntry> {
    let (lo, hi) = pair.spectral_hull();
    let estimate = tail_estimate(ssf, z, lo - 1.0, hi + 1.0)?;
    if estimate > tail_bound {
        return Err(SsfError::TailTooFat { estimate, bound: tail_bound });
    }
    let lhs = trace_lhs(pair, z, ssf.power)?;
    let rhs = trace_integral(ssf, z)?;
    Ok(TraceFormulaEntry { z, lhs, rhs, residual: (lhs - rhs).norm() })
}
