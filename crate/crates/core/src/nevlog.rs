//! Logarithms of dissipative matrices and boundary values of matrix Nevanlinna functions.
//!
//! The logarithm is the one defined by
//! `log K = −i ∫₀^∞ [(K + iλ)^{-1} − (1 + iλ)^{-1} I] dλ`,
//! whose scalar branch has its cut on the closed negative imaginary axis,
//! so `arg ∈ (−π/2, 3π/2)`. Two evaluation paths are provided: a Schur–Parlett
//! path (default) and direct adaptive quadrature of the integral.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;

use crate::error::{Result, SsfError};
use crate::exec::{self, Execution};
use crate::linalg::{self, c, CMat, I};
use crate::quad::{self, QuadConfig};

pub const DISSIPATIVE_TOL: f64 = 1e-10;
pub const CUT_TOL: f64 = 1e-10;
pub const CLUSTER_TOL: f64 = 1e-8;
pub const SINGULAR_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LogMethod {
    #[default]
    Eigen,
    Quadrature,
}

/// Branch of the scalar logarithm, encoded as a rotation: `log_φ(w) = log(e^{iφ} w) − iφ`.
/// The default `φ = 0` is the cut along the negative imaginary axis.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub(crate) struct Branch {
    rotation: f64,
}

impl Branch {
    pub(crate) const STANDARD: Branch = Branch { rotation: 0.0 };
    /// Cut along the positive imaginary axis; used only for fault injection.
    pub(crate) const FLIPPED: Branch = Branch { rotation: PI };

    fn phase(self) -> Complex64 {
        Complex64::from_polar(1.0, self.rotation)
    }
}

/// Scalar logarithm with `arg ∈ (−π/2, 3π/2)`.
pub fn log_scalar(w: Complex64) -> Result<Complex64> {
    check_cut(w)?;
    Ok(principal_branch_log(w))
}

fn principal_branch_log(w: Complex64) -> Complex64 {
    let mut arg = w.arg();
    if arg <= -FRAC_PI_2 {
        arg += 2.0 * PI;
    }
    c(w.norm().ln(), arg)
}

fn cut_distance(w: Complex64) -> f64 {
    // distance to the ray {−it : t ≥ 0}
    if w.im <= 0.0 {
        w.re.abs()
    } else {
        w.norm()
    }
}

fn check_cut(w: Complex64) -> Result<()> {
    if !w.is_finite() || cut_distance(w) < CUT_TOL {
        return Err(SsfError::BranchCutHit { eigenvalue: w });
    }
    Ok(())
}

fn log1p(u: Complex64) -> Complex64 {
    let re = 0.5 * (2.0 * u.re + u.norm_sqr()).ln_1p();
    c(re, u.im.atan2(1.0 + u.re))
}

/// (f(b) − f(a))/(b − a) for f = log, accurate when a and b are close.
fn log_divided_difference(a: Complex64, b: Complex64, fa: Complex64, fb: Complex64) -> Complex64 {
    let u = (b - a) / a;
    if u.norm() < 0.5 {
        let l = log1p(u);
        let wraps = ((fb - fa - l).im / (2.0 * PI)).round();
        (l + c(0.0, 2.0 * PI * wraps)) / (b - a)
    } else {
        (fb - fa) / (b - a)
    }
}

fn is_normal(k: &CMat) -> bool {
    let scale = linalg::max_abs(k).max(1e-300);
    let comm = k * k.adjoint() - k.adjoint() * k;
    linalg::max_abs(&comm) <= 1e-13 * scale * scale
}

/// Schur–Parlett evaluation. `None` when eigenvalues cluster and the matrix is not normal.
fn log_schur(k: &CMat) -> Result<Option<CMat>> {
    let n = k.nrows();
    let (q, t) = k.clone().schur().unpack();
    let diag: Vec<Complex64> = (0..n).map(|i| t[(i, i)]).collect();
    for &mu in &diag {
        check_cut(mu)?;
    }
    let mut f = CMat::zeros(n, n);
    for i in 0..n {
        f[(i, i)] = principal_branch_log(diag[i]);
    }
    if is_normal(k) {
        return Ok(Some(&q * f * q.adjoint()));
    }
    for i in 0..n {
        for j in i + 1..n {
            if (diag[i] - diag[j]).norm() < CLUSTER_TOL {
                return Ok(None);
            }
        }
    }
    for p in 1..n {
        for i in 0..n - p {
            let j = i + p;
            let mut s = t[(i, j)]
                * log_divided_difference(diag[i], diag[j], f[(i, i)], f[(j, j)])
                * (diag[j] - diag[i]);
            for m in i + 1..j {
                s += t[(i, m)] * f[(m, j)] - f[(i, m)] * t[(m, j)];
            }
            f[(i, j)] = s / (diag[j] - diag[i]);
        }
    }
    Ok(Some(&q * f * q.adjoint()))
}

/// Adaptive quadrature of the defining integral, mapped to [0, 1) by λ = s/(1−s).
fn log_quadrature(k: &CMat) -> Result<CMat> {
    let n = k.nrows();
    let (_, t) = k.clone().schur().unpack();
    for i in 0..n {
        check_cut(t[(i, i)])?;
    }
    let id = linalg::identity(n);
    let rhs = &id - k;
    let integrand = |s: f64| -> Result<CMat> {
        let lambda = s / (1.0 - s);
        let jac = 1.0 / ((1.0 - s) * (1.0 - s));
        let shifted = k + &id * c(0.0, lambda);
        let solved = shifted
            .lu()
            .solve(&rhs)
            .ok_or(SsfError::BranchCutHit { eigenvalue: c(0.0, -lambda) })?;
        // (K + iλ)^{-1} − (1 + iλ)^{-1} = (K + iλ)^{-1}(I − K)/(1 + iλ)
        let factor = -I * jac / c(1.0, lambda);
        Ok(solved * factor)
    };
    let cfg = QuadConfig { abs_tol: 1e-11, rel_tol: 1e-12, max_intervals: 6000 };
    Ok(quad::integrate(integrand, 0.0, 1.0, &cfg)?.value)
}

/// Logarithm of an arbitrary square matrix with no eigenvalue on the cut.
pub(crate) fn log_matrix(k: &CMat, method: LogMethod, branch: Branch) -> Result<CMat> {
    if branch != Branch::STANDARD {
        let rotated = k * branch.phase();
        let shift = linalg::identity(k.nrows()) * c(0.0, branch.rotation);
        return Ok(log_matrix(&rotated, method, Branch::STANDARD)? - shift);
    }
    match method {
        LogMethod::Eigen => match log_schur(k)? {
            Some(f) => Ok(f),
            None => log_quadrature(k),
        },
        LogMethod::Quadrature => log_quadrature(k),
    }
}

/// Square matrix with positive semidefinite imaginary part.
#[derive(Debug, Clone)]
pub struct DissipativeMatrix {
    entries: CMat,
}

impl DissipativeMatrix {
    pub fn new(entries: CMat) -> Result<Self> {
        if entries.nrows() == 0 || entries.nrows() != entries.ncols() {
            return Err(SsfError::DimensionMismatch("dissipative matrix must be square".into()));
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(SsfError::InvalidInput("matrix has non-finite entries".into()));
        }
        let min_eigenvalue = linalg::hermitian_eigenvalues(&linalg::im_part(&entries))[0];
        if min_eigenvalue < -DISSIPATIVE_TOL * linalg::max_abs(&entries).max(1.0) {
            return Err(SsfError::NotDissipative { min_eigenvalue });
        }
        Ok(Self { entries })
    }

    pub fn matrix(&self) -> &CMat {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }
}

pub fn log_dissipative(k: &DissipativeMatrix, method: LogMethod) -> Result<CMat> {
    log_matrix(&k.entries, method, Branch::STANDARD)
}

/// `log(K*)` from the same integral applied to `K*`.
///
/// This coincides with `(log K)*` only while no eigenvalue of `K` has
/// argument above π/2; otherwise the two differ by `2πi` on that spectral part.
pub fn log_adjoint(k: &DissipativeMatrix, method: LogMethod) -> Result<CMat> {
    let adj = k.entries.adjoint();
    let (_, t) = k.entries.clone().schur().unpack();
    for i in 0..t.nrows() {
        // iλ ∈ ρ(K) for λ ≥ 0
        let mu = t[(i, i)];
        if cut_distance(mu.conj()) < CUT_TOL {
            return Err(SsfError::BranchCutHit { eigenvalue: mu });
        }
    }
    log_matrix(&adj, method, Branch::STANDARD)
}

/// Matrix Nevanlinna function, evaluable off the real axis and optionally on
/// an interval of analytic continuation.
pub trait NevanlinnaFunction: Sync {
    fn dim(&self) -> usize;
    fn evaluate(&self, z: Complex64) -> Result<CMat>;
    fn real_interval(&self) -> Option<(f64, f64)> {
        None
    }
}

impl<N: NevanlinnaFunction + ?Sized> NevanlinnaFunction for &N {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn evaluate(&self, z: Complex64) -> Result<CMat> {
        (**self).evaluate(z)
    }
    fn real_interval(&self) -> Option<(f64, f64)> {
        (**self).real_interval()
    }
}

/// Closure-backed evaluator.
pub struct FnEvaluator<F> {
    dim: usize,
    f: F,
    interval: Option<(f64, f64)>,
}

impl<F> FnEvaluator<F>
where
    F: Fn(Complex64) -> Result<CMat> + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f, interval: None }
    }

    pub fn with_real_interval(mut self, lo: f64, hi: f64) -> Self {
        self.interval = Some((lo, hi));
        self
    }
}

impl<F> NevanlinnaFunction for FnEvaluator<F>
where
    F: Fn(Complex64) -> Result<CMat> + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn evaluate(&self, z: Complex64) -> Result<CMat> {
        (self.f)(z)
    }
    fn real_interval(&self) -> Option<(f64, f64)> {
        self.interval
    }
}

/// `U* N(z) U` for a fixed unitary `U`.
pub struct Conjugated<N> {
    inner: N,
    unitary: CMat,
}

impl<N: NevanlinnaFunction> Conjugated<N> {
    pub fn new(inner: N, unitary: CMat) -> Self {
        Self { inner, unitary }
    }
}

impl<N: NevanlinnaFunction> NevanlinnaFunction for Conjugated<N> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn evaluate(&self, z: Complex64) -> Result<CMat> {
        Ok(self.unitary.adjoint() * self.inner.evaluate(z)? * &self.unitary)
    }
    fn real_interval(&self) -> Option<(f64, f64)> {
        self.inner.real_interval()
    }
}

fn check_invertible(k: &CMat, z: Complex64) -> Result<()> {
    let sigma_min = linalg::min_singular(k);
    if !(sigma_min > SINGULAR_TOL) {
        return Err(SsfError::SingularValue { z, sigma_min });
    }
    Ok(())
}

fn in_interval(interval: Option<(f64, f64)>, x: f64) -> bool {
    interval.is_some_and(|(lo, hi)| lo < x && x < hi)
}

pub(crate) fn log_nev_with<N: NevanlinnaFunction + ?Sized>(
    n: &N,
    z: Complex64,
    method: LogMethod,
    branch: Branch,
) -> Result<CMat> {
    if z.im > 0.0 {
        let k = n.evaluate(z)?;
        check_invertible(&k, z)?;
        let k = DissipativeMatrix::new(k)?;
        log_matrix(&k.entries, method, branch)
    } else if z.im < 0.0 {
        Ok(log_nev_with(n, z.conj(), method, branch)?.adjoint())
    } else if in_interval(n.real_interval(), z.re) {
        let k = n.evaluate(z)?;
        check_invertible(&k, z)?;
        let (values, vectors) = linalg::hermitian_eigen(&k);
        let logs: Vec<Complex64> = values
            .iter()
            .map(|&v| log_matrix(&CMat::from_element(1, 1, c(v, 0.0)), method, branch).map(|m| m[(0, 0)]))
            .collect::<Result<_>>()?;
        let mut scaled = vectors.clone();
        for (j, l) in logs.iter().enumerate() {
            for i in 0..scaled.nrows() {
                scaled[(i, j)] *= l;
            }
        }
        Ok(scaled * vectors.adjoint())
    } else {
        Err(SsfError::InvalidInput(format!(
            "z = {z} is real and outside the continuation interval"
        )))
    }
}

/// `log N(z)`: `log_dissipative(N(z))` on the upper half-plane, `(log N(z̄))*` below.
pub fn log_nev<N: NevanlinnaFunction + ?Sized>(n: &N, z: Complex64) -> Result<CMat> {
    log_nev_with(n, z, LogMethod::Eigen, Branch::STANDARD)
}

pub(crate) fn im_trace_log<N: NevanlinnaFunction + ?Sized>(n: &N, z: Complex64, branch: Branch) -> Result<f64> {
    Ok(linalg::trace(&log_nev_with(n, z, LogMethod::Eigen, branch)?).im)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UnstablePolicy {
    /// Report the finest-ε sample and flag the point.
    #[default]
    ReportRaw,
    Error,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonSchedule {
    values: Vec<f64>,
    extrapolation_order: u8,
    policy: UnstablePolicy,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self { values: vec![1e-3, 1e-4, 1e-5], extrapolation_order: 1, policy: UnstablePolicy::ReportRaw }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryValue {
    pub value: f64,
    pub stable: bool,
}

impl EpsilonSchedule {
    pub fn new(values: Vec<f64>, extrapolation_order: u8) -> Result<Self> {
        if values.is_empty() {
            return Err(SsfError::InvalidInput("epsilon schedule is empty".into()));
        }
        if values.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
            return Err(SsfError::InvalidInput("epsilon values must be positive".into()));
        }
        if values.windows(2).any(|w| w[1] >= w[0]) {
            return Err(SsfError::InvalidInput("epsilon schedule must be strictly decreasing".into()));
        }
        if extrapolation_order > 1 {
            return Err(SsfError::InvalidInput("extrapolation order must be 0 or 1".into()));
        }
        Ok(Self { values, extrapolation_order, policy: UnstablePolicy::default() })
    }

    pub fn geometric(start: f64, ratio: f64, count: usize) -> Result<Self> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(SsfError::InvalidInput("epsilon ratio must lie in (0, 1)".into()));
        }
        let values = (0..count).map(|k| start * ratio.powi(k as i32)).collect();
        Self::new(values, if count > 1 { 1 } else { 0 })
    }

    pub fn with_policy(mut self, policy: UnstablePolicy) -> Self {
        self.policy = policy;
        self
    }

    /// Same schedule with every ε multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self { values: self.values.iter().map(|e| e * factor).collect(), ..self.clone() }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn extrapolation_order(&self) -> u8 {
        self.extrapolation_order
    }

    pub fn policy(&self) -> UnstablePolicy {
        self.policy
    }

    /// Samples `f` along the schedule and extrapolates to ε = 0.
    pub fn extrapolate(&self, lambda: f64, f: impl Fn(f64) -> Result<f64>) -> Result<BoundaryValue> {
        let samples: Vec<f64> = self.values.iter().map(|&e| f(e)).collect::<Result<_>>()?;
        let diffs: Vec<f64> = samples.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        let stable = diffs.windows(2).all(|d| d[1] <= d[0] + 1e-8);
        let last = *samples.last().unwrap();
        if !stable {
            return match self.policy {
                UnstablePolicy::ReportRaw => Ok(BoundaryValue { value: last, stable: false }),
                UnstablePolicy::Error => Err(SsfError::ExtrapolationUnstable { lambda }),
            };
        }
        let value = if self.extrapolation_order == 1 && samples.len() >= 2 {
            let k = samples.len();
            let (ea, eb) = (self.values[k - 2], self.values[k - 1]);
            let (fa, fb) = (samples[k - 2], samples[k - 1]);
            (ea * fb - eb * fa) / (ea - eb)
        } else {
            last
        };
        Ok(BoundaryValue { value, stable: true })
    }
}

#[derive(Debug, Clone)]
pub struct DensityReport {
    pub lambda_grid: Vec<f64>,
    pub density_trace: Vec<f64>,
    pub constant_c: CMat,
    /// Grid indices where extrapolation was unstable and the raw value was kept.
    pub unresolved: Vec<usize>,
}

pub fn xi_density<N: NevanlinnaFunction + ?Sized>(
    n: &N,
    grid: &[f64],
    sched: &EpsilonSchedule,
) -> Result<DensityReport> {
    xi_density_with(n, grid, sched, Execution::default())
}

pub fn xi_density_with<N: NevanlinnaFunction + ?Sized>(
    n: &N,
    grid: &[f64],
    sched: &EpsilonSchedule,
    exec: Execution,
) -> Result<DensityReport> {
    let values = exec::try_map(grid, exec, |&lambda| {
        sched.extrapolate(lambda, |eps| Ok(im_trace_log(n, c(lambda, eps), Branch::STANDARD)? / PI))
    })?;
    let constant_c = linalg::re_part(&log_nev(n, I)?);
    Ok(DensityReport {
        lambda_grid: grid.to_vec(),
        density_trace: values.iter().map(|b| b.value).collect(),
        unresolved: values.iter().enumerate().filter(|(_, b)| !b.stable).map(|(k, _)| k).collect(),
        constant_c,
    })
}

fn binomial(k: u32, j: u32) -> f64 {
    (0..j).fold(1.0, |acc, i| acc * (k - i) as f64 / (i + 1) as f64)
}

/// k-th central difference of `f` at `z` with step `h`.
fn central_difference<F>(f: &F, z: Complex64, k: u32, h: f64) -> Result<Complex64>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let mut acc = Complex64::default();
    for j in 0..=k {
        let offset = (k as f64 / 2.0 - j as f64) * h;
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        acc += f(z + offset)? * (sign * binomial(k, j));
    }
    Ok(acc / h.powi(k as i32))
}

/// `(tr d^{ℓ−1}(N⁻¹N′), tr d^ℓ log N)` at `z`, both by central differences.
pub fn log_derivative_trace_check<N: NevanlinnaFunction + ?Sized>(
    n: &N,
    z: Complex64,
    ell: u32,
    h: f64,
) -> Result<(Complex64, Complex64)> {
    if ell == 0 {
        return Err(SsfError::InvalidInput("derivative order must be positive".into()));
    }
    let log_derivative = |w: Complex64| -> Result<Complex64> {
        let nw = n.evaluate(w)?;
        check_invertible(&nw, w)?;
        let dn = (n.evaluate(w + h)? - n.evaluate(w - h)?) / c(2.0 * h, 0.0);
        let solved = nw.lu().solve(&dn).ok_or(SsfError::SingularValue { z: w, sigma_min: 0.0 })?;
        Ok(linalg::trace(&solved))
    };
    let trace_log = |w: Complex64| -> Result<Complex64> { Ok(linalg::trace(&log_nev(n, w)?)) };
    let lhs = central_difference(&log_derivative, z, ell - 1, h)?;
    let rhs = central_difference(&trace_log, z, ell, h)?;
    Ok((lhs, rhs))
}
