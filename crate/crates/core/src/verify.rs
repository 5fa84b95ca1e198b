//! Verification suites over pairs and models: Krein residual, Nevanlinna
//! property, Im-log bound, basis invariance, oracle equivalence, sign and
//! trace formula. Each suite records its worst residual against a tolerance.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SsfError};
use crate::exec::{self, Execution};
use crate::linalg::{self, c, CMat, I};
use crate::models::delta::DeltaFunction;
use crate::models::{im_trace_log_value, DecoupledLineModel, DeltaPath, DeltaPointModel, RobinCondition, RobinIntervalModel};
use crate::nevlog::{self, Branch, EpsilonSchedule, LogMethod, NevanlinnaFunction};
use crate::sampling;
use crate::ssf::{self, linspace, validate_grid, SsfGrid};
use crate::triple::PerturbationPair;

pub const KREIN_TOL: f64 = 1e-10;
pub const NEVANLINNA_TOL: f64 = 1e-10;
pub const IM_LOG_TOL: f64 = 1e-10;
pub const BASIS_TOL: f64 = 1e-10;
pub const STEP_ORACLE_TOL: f64 = 1e-2;
pub const ORACLE_GAP: f64 = 0.05;
pub const NONNEGATIVITY_TOL: f64 = 1e-6;
pub const TRACE_TOL: f64 = 1e-3;

/// Deliberate corruptions used as negative controls.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Faults {
    /// Replace every boundary value `M(z)` by `M(z)*`, flipping the sign of Im M.
    pub flip_weyl_sign: bool,
    /// Evaluate logarithms with the cut on the positive imaginary axis.
    pub corrupt_log_branch: bool,
}

impl Faults {
    fn branch(self) -> Branch {
        if self.corrupt_log_branch {
            Branch::FLIPPED
        } else {
            Branch::STANDARD
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SuiteStatus {
    Pass,
    Fail,
    Skipped(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOutcome {
    pub name: &'static str,
    pub status: SuiteStatus,
    pub max_residual: Option<f64>,
    pub tolerance: f64,
    /// Error that aborted the suite, if any.
    pub detail: Option<String>,
}

impl SuiteOutcome {
    fn measured(name: &'static str, residual: f64, tolerance: f64) -> Self {
        let status = if residual <= tolerance { SuiteStatus::Pass } else { SuiteStatus::Fail };
        Self { name, status, max_residual: Some(residual), tolerance, detail: None }
    }

    fn from_result(name: &'static str, tolerance: f64, r: Result<f64>) -> Self {
        match r {
            Ok(residual) => Self::measured(name, residual, tolerance),
            Err(e) => Self { name, status: SuiteStatus::Fail, max_residual: None, tolerance, detail: Some(e.to_string()) },
        }
    }

    fn skipped(name: &'static str, tolerance: f64, reason: &str) -> Self {
        Self { name, status: SuiteStatus::Skipped(reason.into()), max_residual: None, tolerance, detail: None }
    }

    pub fn failed(&self) -> bool {
        self.status == SuiteStatus::Fail
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub suites: Vec<SuiteOutcome>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(|s| !s.failed())
    }

    pub fn suite(&self, name: &str) -> Option<&SuiteOutcome> {
        self.suites.iter().find(|s| s.name == name)
    }
}

#[derive(Debug, Clone)]
pub struct VerifyConfig {
    pub grid: Vec<f64>,
    pub schedule: EpsilonSchedule,
    pub basis_seed: u64,
    pub unitaries: usize,
    pub exec: Execution,
}

impl VerifyConfig {
    pub fn new(grid: Vec<f64>, schedule: EpsilonSchedule) -> Self {
        Self { grid, schedule, basis_seed: 0, unitaries: 20, exec: Execution::default() }
    }
}

type StepFn<'a> = Box<dyn Fn(f64) -> Result<i64> + Sync + 'a>;
type ValueFn<'a> = Box<dyn Fn(f64) -> Result<f64> + Sync + 'a>;

/// Points where an oracle returns an error are not compared.
enum Oracle<'a> {
    /// Integer-valued counting difference, compared away from its jumps.
    Step(StepFn<'a>),
    /// Continuous closed form with its own tolerance.
    Smooth(ValueFn<'a>, f64),
}

/// ξ as a signed sum of boundary limits of Nevanlinna functions plus an
/// integer offset, together with what is known about it.
pub struct Subject<'a> {
    components: Vec<(f64, Box<dyn NevanlinnaFunction + 'a>)>,
    offset: Option<ValueFn<'a>>,
    oracle: Oracle<'a>,
    pair: Option<&'a PerturbationPair>,
    sign_asserted: bool,
}

impl<'a> Subject<'a> {
    pub fn pair(pair: &'a PerturbationPair) -> Result<Self> {
        let components: Vec<(f64, Box<dyn NevanlinnaFunction + 'a>)> = if pair.is_t_positive() {
            vec![(1.0, Box::new(pair.weyl_function()))]
        } else {
            let (to_a, to_b) = pair.comparison_pairs()?;
            vec![(1.0, Box::new(OwnedWeyl(to_b))), (-1.0, Box::new(OwnedWeyl(to_a)))]
        };
        Ok(Self {
            components,
            offset: None,
            oracle: Oracle::Step(Box::new(move |l| Ok(ssf::ssf_counting_oracle(pair.a_op(), pair.b_op(), l)))),
            pair: Some(pair),
            sign_asserted: pair.is_t_positive(),
        })
    }

    pub fn robin(model: &'a RobinIntervalModel) -> Self {
        let (b0, b1) = (model.beta0(), model.beta1());
        Self {
            components: vec![
                (1.0, Box::new(model.weyl_function(RobinCondition::Beta1))),
                (-1.0, Box::new(model.weyl_function(RobinCondition::Beta0))),
            ],
            offset: None,
            oracle: Oracle::Step(Box::new(move |l| model.counting_difference(l))),
            pair: None,
            sign_asserted: b0[0] >= b1[0] && b0[1] >= b1[1],
        }
    }

    pub fn delta(model: &'a DeltaPointModel, path: DeltaPath) -> Result<Self> {
        let components: Vec<(f64, Box<dyn NevanlinnaFunction + 'a>)> = match path {
            DeltaPath::Direct => {
                if model.alpha() >= 0.0 {
                    return Err(SsfError::SignPathMismatch { alpha: model.alpha() });
                }
                vec![(1.0, Box::new(model.evaluator(DeltaFunction::Direct)))]
            }
            DeltaPath::Comparison => {
                if model.comparison_c().is_none() {
                    return Err(SsfError::InvalidInput("the comparison path needs comparison_c".into()));
                }
                vec![
                    (1.0, Box::new(model.evaluator(DeltaFunction::ComparisonAlpha))),
                    (-1.0, Box::new(model.evaluator(DeltaFunction::ComparisonZero))),
                ]
            }
        };
        let tol = if path == DeltaPath::Direct { 1e-6 } else { 1e-4 };
        Ok(Self {
            components,
            offset: None,
            // the boundary limit is not resolved by the schedule at the threshold itself
            oracle: Oracle::Smooth(
                Box::new(move |l| {
                    if l.abs() < 0.01 {
                        Err(SsfError::InvalidInput("too close to the threshold".into()))
                    } else {
                        Ok(model.closed_form(l))
                    }
                }),
                tol,
            ),
            pair: None,
            sign_asserted: model.alpha() < 0.0,
        })
    }

    pub fn decouple(model: &'a DecoupledLineModel) -> Self {
        Self {
            components: vec![(1.0, Box::new(model.evaluator(false))), (-1.0, Box::new(model.evaluator(true)))],
            offset: Some(Box::new(move |l| {
                Ok(model.dirichlet_counting(false, l)? as f64 - model.dirichlet_counting(true, l)? as f64)
            })),
            // below zero ξ counts the bound states of the perturbed line
            oracle: Oracle::Step(Box::new(move |l| {
                if l < 0.0 {
                    Ok(-(model.whole_line_counting(true, l)? as i64))
                } else {
                    Err(SsfError::InvalidInput("no oracle on the continuous spectrum".into()))
                }
            })),
            pair: None,
            sign_asserted: false,
        }
    }

    fn faulted(&self, faults: Faults) -> Vec<(f64, Faulted<'_>)> {
        self.components.iter().map(|(s, n)| (*s, Faulted { inner: n.as_ref(), flip: faults.flip_weyl_sign })).collect()
    }

    fn value(&self, parts: &[(f64, Faulted<'_>)], lambda: f64, sched: &EpsilonSchedule, branch: Branch) -> Result<f64> {
        let mut total = match &self.offset {
            Some(f) => f(lambda)?,
            None => 0.0,
        };
        for (sign, n) in parts {
            let bv = sched.extrapolate(lambda, |eps| Ok(nevlog::im_trace_log(n, c(lambda, eps), branch)? / PI))?;
            total += sign * bv.value;
        }
        Ok(total)
    }
}

/// Pair owned by its Weyl evaluator.
struct OwnedWeyl(PerturbationPair);

impl NevanlinnaFunction for OwnedWeyl {
    fn dim(&self) -> usize {
        self.0.boundary_dim()
    }
    fn evaluate(&self, z: Complex64) -> Result<CMat> {
        self.0.weyl(z)
    }
}

struct Faulted<'a> {
    inner: &'a dyn NevanlinnaFunction,
    flip: bool,
}

impl NevanlinnaFunction for Faulted<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn evaluate(&self, z: Complex64) -> Result<CMat> {
        let k = self.inner.evaluate(z)?;
        Ok(if self.flip { k.adjoint() } else { k })
    }
}

fn worst(values: impl IntoIterator<Item = Result<f64>>) -> Result<f64> {
    values.into_iter().try_fold(0.0f64, |m, v| Ok(m.max(v?)))
}

/// Off-axis sample points spread over the grid hull.
fn sample_points(grid: &[f64]) -> Vec<Complex64> {
    let (lo, hi) = (grid[0], grid[grid.len() - 1]);
    let mut zs = vec![I, c(0.0, 2.0)];
    for l in linspace(lo, hi, 12) {
        for eps in [1.0, 1e-1, 1e-3] {
            zs.push(c(l, eps));
        }
    }
    zs
}

/// Evenly thinned copy of the grid with at most `max` points.
fn thin(grid: &[f64], max: usize) -> Vec<f64> {
    if grid.len() <= max {
        return grid.to_vec();
    }
    (0..max).map(|k| grid[k * (grid.len() - 1) / (max - 1)]).collect()
}

/// Points where the Krein identity is checked: both half-planes and the
/// real gaps of σ(A) ∪ σ(B), including the two unbounded ones.
pub fn krein_sample_points(pair: &PerturbationPair) -> Vec<Complex64> {
    let (lo, hi) = pair.spectral_hull();
    let mid = 0.5 * (lo + hi);
    let mut zs = vec![I, -I, c(0.0, 2.0), c(-1.0, 1.0), c(mid, 0.5), c(mid, -0.5), c(lo, 1.0), c(hi, -1.0)];
    let mut spectrum: Vec<f64> = pair.a_op().eigenvalues().iter().chain(pair.b_op().eigenvalues()).copied().collect();
    spectrum.sort_by(f64::total_cmp);
    zs.push(c(lo - 1.0, 0.0));
    zs.push(c(hi + 1.0, 0.0));
    for w in spectrum.windows(2) {
        if w[1] - w[0] > 0.1 {
            zs.push(c(0.5 * (w[0] + w[1]), 0.0));
        }
    }
    zs
}

fn krein_suite(pair: &PerturbationPair) -> Result<f64> {
    worst(krein_sample_points(pair).into_iter().map(|z| Ok(pair.krein_residual(z)? / pair.krein_scale(z)?)))
}

fn nevanlinna_suite(parts: &[(f64, Faulted<'_>)], zs: &[Complex64], exec: Execution) -> Result<f64> {
    let per_z = exec::try_map(zs, exec, |&z| {
        worst(parts.iter().map(|(_, n)| {
            let k = n.evaluate(z)?;
            let scale = linalg::max_abs(&k).max(1.0);
            let min = linalg::hermitian_eigenvalues(&linalg::im_part(&k))[0];
            Ok((-min / scale).max(0.0))
        }))
    })?;
    Ok(per_z.into_iter().fold(0.0, f64::max))
}

fn im_log_suite(parts: &[(f64, Faulted<'_>)], zs: &[Complex64], branch: Branch, exec: Execution) -> Result<f64> {
    let per_z = exec::try_map(zs, exec, |&z| {
        worst(parts.iter().map(|(_, n)| {
            let log = nevlog::log_nev_with(n, z, LogMethod::Eigen, branch)?;
            let eig = linalg::hermitian_eigenvalues(&linalg::im_part(&log));
            let (lo, hi) = (eig[0], eig[eig.len() - 1]);
            Ok((-lo).max(hi - PI).max(0.0))
        }))
    })?;
    Ok(per_z.into_iter().fold(0.0, f64::max))
}

fn basis_suite(parts: &[(f64, Faulted<'_>)], grid: &[f64], cfg: &VerifyConfig, branch: Branch) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.basis_seed);
    let unitaries: Vec<Vec<CMat>> = (0..cfg.unitaries)
        .map(|_| parts.iter().map(|(_, n)| sampling::random_unitary(n.dim(), &mut rng)).collect())
        .collect();
    let eps = cfg.schedule.values();
    let per_point = exec::try_map(grid, cfg.exec, |&lambda| {
        // boundary values are evaluated once and rotated in every basis
        let values: Vec<Vec<CMat>> = parts
            .iter()
            .map(|(_, n)| eps.iter().map(|&e| n.evaluate(c(lambda, e))).collect::<Result<_>>())
            .collect::<Result<_>>()?;
        let xi = |rotation: Option<&[CMat]>| -> Result<f64> {
            let mut total = 0.0;
            for (j, (sign, _)) in parts.iter().enumerate() {
                let bv = cfg.schedule.extrapolate(lambda, |e| {
                    let k = eps.iter().position(|&x| x == e).expect("schedule value");
                    let m = match rotation {
                        Some(u) => u[j].adjoint() * &values[j][k] * &u[j],
                        None => values[j][k].clone(),
                    };
                    im_trace_log_value(m, c(lambda, e), branch)
                })?;
                total += sign * bv.value;
            }
            Ok(total)
        };
        let base = xi(None)?;
        worst(unitaries.iter().map(|u| Ok((xi(Some(u))? - base).abs())))
    })?;
    Ok(per_point.into_iter().fold(0.0, f64::max))
}

fn oracle_suite(subject: &Subject<'_>, xi: &SsfGrid) -> Result<(f64, f64)> {
    match &subject.oracle {
        Oracle::Step(f) => {
            let mut err = 0.0f64;
            for (l, x) in xi.points() {
                let (Ok(left), Ok(mid), Ok(right)) = (f(l - ORACLE_GAP), f(l), f(l + ORACLE_GAP)) else {
                    continue;
                };
                if left == mid && mid == right {
                    err = err.max((x - mid as f64).abs());
                }
            }
            Ok((err, STEP_ORACLE_TOL))
        }
        Oracle::Smooth(f, tol) => {
            let err = xi.points().filter_map(|(l, x)| f(l).ok().map(|o| (x - o).abs())).fold(0.0, f64::max);
            Ok((err, *tol))
        }
    }
}

fn trace_suite(
    subject: &Subject<'_>,
    pair: &PerturbationPair,
    parts: &[(f64, Faulted<'_>)],
    cfg: &VerifyConfig,
    branch: Branch,
) -> Result<f64> {
    let (lo, hi) = pair.spectral_hull();
    let grid = linspace(lo - 1.0, hi + 1.0, 1201);
    let sched = &cfg.schedule;
    let values = exec::try_map(&grid, cfg.exec, |&l| subject.value(parts, l, sched, branch))?;
    let mut xi = SsfGrid::new(grid, values, sched.clone(), 1)?;
    ssf::refine_jumps(&mut xi, 0.5, 1e-9, |l| subject.value(parts, l, sched, branch))?;
    let mut out = 0.0f64;
    for m in [1, 3] {
        let xi_m = xi.clone().with_power(m)?;
        for z in [I, c(0.0, 2.0)] {
            out = out.max(ssf::trace_formula_residual(pair, &xi_m, z, 1e-8)?.relative_residual());
        }
    }
    Ok(out)
}

/// Runs every suite and collects the outcomes; numerical breakdowns inside a
/// suite count as that suite failing.
pub fn verify(subject: &Subject<'_>, cfg: &VerifyConfig, faults: Faults) -> Result<VerifyReport> {
    validate_grid(&cfg.grid)?;
    let branch = faults.branch();
    let parts = subject.faulted(faults);
    let zs = sample_points(&cfg.grid);
    let mut suites = vec![match subject.pair {
        Some(pair) => SuiteOutcome::from_result("krein-residual", KREIN_TOL, krein_suite(pair)),
        None => SuiteOutcome::skipped("krein-residual", KREIN_TOL, "skipped (no matrix resolvents for this model)"),
    }];
    suites.push(SuiteOutcome::from_result("nevanlinna-property", NEVANLINNA_TOL, nevanlinna_suite(&parts, &zs, cfg.exec)));
    suites.push(SuiteOutcome::from_result("im-log-bound", IM_LOG_TOL, im_log_suite(&parts, &zs, branch, cfg.exec)));
    suites.push(SuiteOutcome::from_result(
        "basis-invariance",
        BASIS_TOL,
        basis_suite(&parts, &thin(&cfg.grid, 40), cfg, branch),
    ));

    let xi = exec::try_map(&cfg.grid, cfg.exec, |&l| subject.value(&parts, l, &cfg.schedule, branch))
        .and_then(|v| SsfGrid::new(cfg.grid.clone(), v, cfg.schedule.clone(), 1));
    match &xi {
        Ok(xi) => {
            let (err, tol) = oracle_suite(subject, xi)?;
            suites.push(SuiteOutcome::measured("oracle-equivalence", err, tol));
            suites.push(if subject.sign_asserted {
                let worst_negative = xi.xi().iter().fold(0.0f64, |m, &x| m.max(-x));
                SuiteOutcome::measured("nonnegativity", worst_negative, NONNEGATIVITY_TOL)
            } else {
                SuiteOutcome::skipped("nonnegativity", NONNEGATIVITY_TOL, "skipped (sign condition not asserted)")
            });
        }
        Err(e) => {
            let detail = Some(e.to_string());
            for (name, tol) in [("oracle-equivalence", STEP_ORACLE_TOL), ("nonnegativity", NONNEGATIVITY_TOL)] {
                suites.push(SuiteOutcome { name, status: SuiteStatus::Fail, max_residual: None, tolerance: tol, detail: detail.clone() });
            }
        }
    }

    suites.push(match subject.pair {
        Some(pair) => SuiteOutcome::from_result("trace-formula", TRACE_TOL, trace_suite(subject, pair, &parts, cfg, branch)),
        None => SuiteOutcome::skipped("trace-formula", TRACE_TOL, "skipped (matrix pairs only)"),
    });
    Ok(VerifyReport { suites })
}
