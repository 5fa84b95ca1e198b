//! Globally adaptive Gauss–Kronrod (7/15) quadrature for scalar and matrix integrands.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;

use crate::error::{Result, SsfError};
use crate::linalg::CMat;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Values that can be summed with real weights.
pub trait QuadValue: Clone {
    fn scaled(&self, a: f64) -> Self;
    fn add_scaled(&mut self, a: f64, other: &Self);
    fn size(&self) -> f64;
}

impl QuadValue for f64 {
    fn scaled(&self, a: f64) -> Self {
        a * self
    }
    fn add_scaled(&mut self, a: f64, other: &Self) {
        *self += a * other;
    }
    fn size(&self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn scaled(&self, a: f64) -> Self {
        self * a
    }
    fn add_scaled(&mut self, a: f64, other: &Self) {
        *self += other * a;
    }
    fn size(&self) -> f64 {
        self.norm()
    }
}

impl QuadValue for CMat {
    fn scaled(&self, a: f64) -> Self {
        self.map(|x| x * a)
    }
    fn add_scaled(&mut self, a: f64, other: &Self) {
        self.zip_apply(other, |x, y| *x += y * a);
    }
    fn size(&self) -> f64 {
        self.iter().fold(0.0, |m, x| m.max(x.norm()))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self { abs_tol: 1e-12, rel_tol: 1e-12, max_intervals: 4000 }
    }
}

#[derive(Debug, Clone)]
pub struct QuadResult<T> {
    pub value: T,
    pub error: f64,
    pub evaluations: usize,
}

struct Segment<T> {
    a: f64,
    b: f64,
    value: T,
    error: f64,
}

impl<T> PartialEq for Segment<T> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<T> Eq for Segment<T> {}
impl<T> PartialOrd for Segment<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Segment<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<T, F>(f: &mut F, a: f64, b: f64) -> Result<Segment<T>>
where
    T: QuadValue,
    F: FnMut(f64) -> Result<T>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center)?;
    let mut kronrod = fc.scaled(WGK[7]);
    let mut gauss = fc.scaled(WG[3]);
    for (k, &x) in XGK.iter().take(7).enumerate() {
        let f1 = f(center - half * x)?;
        let f2 = f(center + half * x)?;
        kronrod.add_scaled(WGK[k], &f1);
        kronrod.add_scaled(WGK[k], &f2);
        if k % 2 == 1 {
            gauss.add_scaled(WG[k / 2], &f1);
            gauss.add_scaled(WG[k / 2], &f2);
        }
    }
    let value = kronrod.scaled(half);
    let mut diff = value.clone();
    diff.add_scaled(-half, &gauss);
    Ok(Segment { a, b, error: diff.size(), value })
}

/// Integrates `f` over [a, b]; fails with `QuadratureFailure` when the
/// interval budget runs out before the tolerance is met.
pub fn integrate<T, F>(mut f: F, a: f64, b: f64, cfg: &QuadConfig) -> Result<QuadResult<T>>
where
    T: QuadValue,
    F: FnMut(f64) -> Result<T>,
{
    let first = gk15(&mut f, a, b)?;
    let mut total = first.value.clone();
    let mut total_err = first.error;
    let mut heap = BinaryHeap::new();
    heap.push(first);
    let mut evaluations = 15;
    loop {
        let tol = cfg.abs_tol.max(cfg.rel_tol * total.size());
        if total_err <= tol {
            break;
        }
        if heap.len() >= cfg.max_intervals {
            return Err(SsfError::QuadratureFailure { estimate: total_err, tolerance: tol });
        }
        let worst = heap.pop().expect("heap never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            return Err(SsfError::QuadratureFailure { estimate: total_err, tolerance: tol });
        }
        let left = gk15(&mut f, worst.a, mid)?;
        let right = gk15(&mut f, mid, worst.b)?;
        evaluations += 30;
        total.add_scaled(-1.0, &worst.value);
        total.add_scaled(1.0, &left.value);
        total.add_scaled(1.0, &right.value);
        total_err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
    // Re-sum to shed the drift of incremental updates.
    let mut iter = heap.into_iter();
    let first = iter.next().expect("heap never empty");
    let mut value = first.value;
    let mut error = first.error;
    for seg in iter {
        value.add_scaled(1.0, &seg.value);
        error += seg.error;
    }
    Ok(QuadResult { value, error, evaluations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x| Ok(x.powi(10)), 0.0, 1.0, &QuadConfig::default()).unwrap();
        assert!((r.value - 1.0 / 11.0).abs() < 1e-15);
    }

    #[test]
    fn peaked_integrand() {
        // ∫_{-1}^{1} δ/(x²+δ²) dx = 2 atan(1/δ)
        let delta = 1e-4;
        let r = integrate(|x| Ok(delta / (x * x + delta * delta)), -1.0, 1.0, &QuadConfig::default()).unwrap();
        assert!((r.value - 2.0 * (1.0 / delta).atan()).abs() < 1e-9);
    }

    #[test]
    fn complex_integrand() {
        let r = integrate(|x: f64| Ok(Complex64::new(0.0, x).exp()), 0.0, std::f64::consts::PI, &QuadConfig::default()).unwrap();
        assert!((r.value - Complex64::new(0.0, 2.0)).norm() < 1e-13);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let cfg = QuadConfig { abs_tol: 1e-14, rel_tol: 0.0, max_intervals: 3 };
        let err = integrate(|x: f64| Ok(x.abs().sqrt().recip()), -1.0, 1.0, &cfg).unwrap_err();
        assert!(matches!(err, SsfError::QuadratureFailure { .. }));
    }
}
