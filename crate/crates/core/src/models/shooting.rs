//! Shooting solves for `−u″ + q u = z u` on an interval: an embedded
//! Dormand–Prince 5(4) integrator, fundamental systems and Prüfer angles.

use num_complex::Complex64;

use crate::error::{Result, SsfError};

/// Real potential sampled on a uniform mesh, linear between knots.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshFunction {
    start: f64,
    step: f64,
    values: Vec<f64>,
}

impl MeshFunction {
    pub fn new(start: f64, step: f64, values: Vec<f64>) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() || !start.is_finite() {
            return Err(SsfError::InvalidInput("mesh step must be positive and finite".into()));
        }
        if values.len() < 2 {
            return Err(SsfError::InvalidInput("a mesh function needs at least two samples".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(SsfError::InvalidInput("mesh samples must be finite".into()));
        }
        Ok(Self { start, step, values })
    }

    /// Samples `f` at `cells + 1` equispaced knots of `[start, end]`.
    pub fn from_fn(start: f64, end: f64, cells: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        if cells == 0 || !(end > start) {
            return Err(SsfError::InvalidInput("mesh needs end > start and at least one cell".into()));
        }
        let step = (end - start) / cells as f64;
        let values = (0..=cells).map(|k| f(start + step * k as f64)).collect();
        Self::new(start, step, values)
    }

    pub fn constant(start: f64, end: f64, value: f64) -> Result<Self> {
        Self::from_fn(start, end, 1, |_| value)
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.knot(self.values.len() - 1)
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn cells(&self) -> usize {
        self.values.len() - 1
    }

    fn knot(&self, k: usize) -> f64 {
        self.start + self.step * k as f64
    }

    /// Linear interpolant, held constant beyond the ends.
    pub fn value(&self, x: f64) -> f64 {
        let t = ((x - self.start) / self.step).clamp(0.0, self.cells() as f64);
        let k = (t.floor() as usize).min(self.cells() - 1);
        let s = t - k as f64;
        self.values[k] * (1.0 - s) + self.values[k + 1] * s
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Cell boundaries, so integrators never step across a kink.
    fn breakpoints(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.cells()).map(|k| (self.knot(k), if k + 1 == self.cells() { self.end() } else { self.knot(k + 1) }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeTolerance {
    pub rel: f64,
    pub abs: f64,
    pub max_steps: usize,
}

impl Default for OdeTolerance {
    fn default() -> Self {
        Self { rel: 1e-10, abs: 1e-12, max_steps: 200_000 }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrates `y′ = f(x, y)` from `x0` to `x1` with the Dormand–Prince 5(4)
/// pair and proportional step control.
pub fn dopri5<const N: usize>(
    f: impl Fn(f64, &[f64; N]) -> [f64; N],
    x0: f64,
    x1: f64,
    y0: [f64; N],
    tol: &OdeTolerance,
) -> Result<[f64; N]> {
    let span = x1 - x0;
    if span == 0.0 {
        return Ok(y0);
    }
    let dir = span.signum();
    let mut x = x0;
    let mut y = y0;
    let mut h = span.abs().min(0.05);
    let mut k = [[0.0; N]; 7];
    for _ in 0..tol.max_steps {
        let remaining = (x1 - x) * dir;
        if remaining <= 0.0 {
            return Ok(y);
        }
        let last = h >= remaining;
        let step = if last { remaining } else { h };
        let hs = step * dir;
        k[0] = f(x, &y);
        for s in 1..7 {
            let mut ys = y;
            for (i, yi) in ys.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += A[s][j] * kj[i];
                }
                *yi += hs * acc;
            }
            k[s] = f(x + C[s] * hs, &ys);
        }
        let mut y_new = y;
        let mut err = 0.0;
        for i in 0..N {
            let acc: f64 = (0..6).map(|s| A[6][s] * k[s][i]).sum();
            let e: f64 = (0..7).map(|s| E[s] * k[s][i]).sum();
            y_new[i] = y[i] + hs * acc;
            let sc = tol.abs + tol.rel * y[i].abs().max(y_new[i].abs());
            err += (hs * e / sc).powi(2);
        }
        let err = (err / N as f64).sqrt();
        if !err.is_finite() {
            return Err(SsfError::OdeSolveFailure { x });
        }
        if err <= 1.0 {
            x = if last { x1 } else { x + hs };
            y = y_new;
            if last {
                return Ok(y);
            }
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h = step * factor;
        if h <= 1e-14 * (1.0 + x.abs()) {
            return Err(SsfError::OdeSolveFailure { x });
        }
    }
    Err(SsfError::OdeSolveFailure { x })
}

/// Values and derivatives at the right end of the two solutions that start
/// from `(u, u′) = (1, 0)` and `(0, 1)` at the left end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FundamentalSystem {
    pub value: [Complex64; 2],
    pub derivative: [Complex64; 2],
}

/// Solves `u″ = (q − z) u` across the mesh of `q`.
pub fn fundamental_system(q: &MeshFunction, z: Complex64, tol: &OdeTolerance) -> Result<FundamentalSystem> {
    let rhs = |x: f64, y: &[f64; 8]| -> [f64; 8] {
        let w = Complex64::new(q.value(x), 0.0) - z;
        let mut out = [0.0; 8];
        for s in 0..2 {
            let o = 4 * s;
            let u = Complex64::new(y[o], y[o + 1]);
            let acc = w * u;
            out[o] = y[o + 2];
            out[o + 1] = y[o + 3];
            out[o + 2] = acc.re;
            out[o + 3] = acc.im;
        }
        out
    };
    let mut y = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0];
    for (a, b) in q.breakpoints() {
        y = dopri5(rhs, a, b, y, tol)?;
    }
    Ok(FundamentalSystem {
        value: [Complex64::new(y[0], y[1]), Complex64::new(y[4], y[5])],
        derivative: [Complex64::new(y[2], y[3]), Complex64::new(y[6], y[7])],
    })
}

/// Prüfer angle θ with `u = r sin θ`, `u′ = r cos θ` for real `λ`, carried
/// continuously from `theta0` at the left end to the right end.
pub fn prufer_angle(q: &MeshFunction, lambda: f64, theta0: f64, tol: &OdeTolerance) -> Result<f64> {
    let rhs = |x: f64, y: &[f64; 1]| -> [f64; 1] {
        let (s, c) = y[0].sin_cos();
        [c * c + (lambda - q.value(x)) * s * s]
    };
    let mut y = [theta0];
    for (a, b) in q.breakpoints() {
        y = dopri5(rhs, a, b, y, tol)?;
    }
    Ok(y[0])
}

/// Number of `n ≥ 0` with `target + nπ < theta`.
pub fn angle_count(theta: f64, target: f64) -> usize {
    let t = (theta - target) / std::f64::consts::PI;
    if t <= 0.0 {
        0
    } else {
        t.ceil() as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn harmonic_oscillator_step() {
        // y″ = −y from (1, 0) over 2π returns to the start.
        let tol = OdeTolerance::default();
        let y = dopri5(|_, y: &[f64; 2]| [y[1], -y[0]], 0.0, 2.0 * PI, [1.0, 0.0], &tol).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-9 && y[1].abs() < 1e-9);
    }

    #[test]
    fn backward_integration() {
        let tol = OdeTolerance::default();
        let y = dopri5(|_, y: &[f64; 1]| [y[0]], 1.0, 0.0, [1.0], &tol).unwrap();
        assert!((y[0] - (-1.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn mesh_interpolation() {
        let m = MeshFunction::new(0.0, 0.5, vec![0.0, 1.0, 3.0]).unwrap();
        assert_eq!(m.value(0.25), 0.5);
        assert_eq!(m.value(0.75), 2.0);
        assert_eq!(m.value(-1.0), 0.0);
        assert_eq!(m.value(2.0), 3.0);
        assert_eq!(m.end(), 1.0);
        assert!(MeshFunction::new(0.0, 0.0, vec![1.0, 2.0]).is_err());
        assert!(MeshFunction::new(0.0, 1.0, vec![1.0]).is_err());
    }

    #[test]
    fn free_fundamental_system_matches_closed_form() {
        // q = 0, z = −1: y1 = cosh x, y2 = sinh x.
        let q = MeshFunction::constant(0.0, 1.0, 0.0).unwrap();
        let f = fundamental_system(&q, Complex64::new(-1.0, 0.0), &OdeTolerance::default()).unwrap();
        let (ch, sh) = (1f64.cosh(), 1f64.sinh());
        assert!((f.value[0].re - ch).abs() < 1e-9 && (f.derivative[0].re - sh).abs() < 1e-9);
        assert!((f.value[1].re - sh).abs() < 1e-9 && (f.derivative[1].re - ch).abs() < 1e-9);
    }

    #[test]
    fn complex_energy_matches_closed_form() {
        // q = 0: y2 = sin(kx)/k with k = √z.
        let z = Complex64::new(3.0, 0.7);
        let q = MeshFunction::constant(0.0, 2.0, 0.0).unwrap();
        let f = fundamental_system(&q, z, &OdeTolerance::default()).unwrap();
        let k = z.sqrt();
        let y2 = (k * 2.0).sin() / k;
        assert!((f.value[1] - y2).norm() < 1e-9);
        assert!((f.value[0] - (k * 2.0).cos()).norm() < 1e-9);
    }

    #[test]
    fn wronskian_is_conserved() {
        let q = MeshFunction::from_fn(0.0, 1.5, 30, |x| (3.0 * x).sin() - x * x).unwrap();
        let f = fundamental_system(&q, Complex64::new(7.0, -2.0), &OdeTolerance::default()).unwrap();
        let w = f.value[0] * f.derivative[1] - f.value[1] * f.derivative[0];
        assert!((w - 1.0).norm() < 1e-9);
    }

    #[test]
    fn prufer_counts_dirichlet_modes() {
        // Dirichlet on (0, 1), q = 0: eigenvalues (kπ)².
        let q = MeshFunction::constant(0.0, 1.0, 0.0).unwrap();
        let tol = OdeTolerance::default();
        for (lambda, expected) in [(5.0, 0), (10.0, 1), (40.0, 2), (100.0, 3)] {
            let theta = prufer_angle(&q, lambda, 0.0, &tol).unwrap();
            assert_eq!(angle_count(theta, PI), expected, "λ = {lambda}");
        }
    }

    #[test]
    fn angle_count_is_strict() {
        assert_eq!(angle_count(0.5, 1.0), 0);
        assert_eq!(angle_count(1.5, 1.0), 1);
        assert_eq!(angle_count(1.0 + PI + 0.1, 1.0), 2);
    }
}
