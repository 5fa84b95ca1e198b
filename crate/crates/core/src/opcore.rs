//! Finite Hermitian operators: resolvents, spectral data, counting functions.

use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{Result, SsfError};
use crate::linalg::{self, c, CMat};

pub const SYMMETRY_TOL: f64 = 1e-12;
pub const SPECTRUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct SpectralData {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMat,
}

impl SpectralData {
    pub fn reconstruct(&self) -> CMat {
        linalg::spectral_apply(&self.eigenvalues, &self.eigenvectors, |x| c(x, 0.0))
    }

    pub fn apply(&self, f: impl Fn(f64) -> Complex64) -> CMat {
        linalg::spectral_apply(&self.eigenvalues, &self.eigenvectors, f)
    }
}

#[derive(Debug, Clone)]
pub struct HermitianOperator {
    entries: CMat,
    spectral: OnceLock<SpectralData>,
}

impl HermitianOperator {
    /// Symmetrizes inputs whose asymmetry is within `SYMMETRY_TOL`, rejects the rest.
    pub fn new(entries: CMat) -> Result<Self> {
        if entries.nrows() == 0 || entries.nrows() != entries.ncols() {
            return Err(SsfError::DimensionMismatch(format!(
                "Hermitian operator must be square with dim >= 1, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(SsfError::InvalidInput("matrix has non-finite entries".into()));
        }
        let asymmetry = linalg::max_abs(&(&entries - entries.adjoint()));
        if asymmetry > SYMMETRY_TOL {
            return Err(SsfError::NotHermitian { asymmetry });
        }
        Ok(Self::from_hermitian_unchecked(linalg::re_part(&entries)))
    }

    pub(crate) fn from_hermitian_unchecked(entries: CMat) -> Self {
        Self { entries, spectral: OnceLock::new() }
    }

    pub fn from_real_diagonal(values: &[f64]) -> Result<Self> {
        Self::new(linalg::diag_real(values))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.entries
    }

    pub fn spectral_data(&self) -> &SpectralData {
        self.spectral.get_or_init(|| {
            let (eigenvalues, eigenvectors) = linalg::hermitian_eigen(&self.entries);
            SpectralData { eigenvalues, eigenvectors }
        })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.spectral_data().eigenvalues
    }

    pub fn distance_to_spectrum(&self, z: Complex64) -> f64 {
        self.eigenvalues()
            .iter()
            .map(|&l| (c(l, 0.0) - z).norm())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn resolvent(&self, z: Complex64) -> Result<CMat> {
        let distance = self.distance_to_spectrum(z);
        if distance <= SPECTRUM_TOL {
            return Err(SsfError::SpectrumHit { z, distance });
        }
        Ok(self.spectral_data().apply(|l| (c(l, 0.0) - z).inv()))
    }

    /// (H − z)^{-k}
    pub fn resolvent_power(&self, z: Complex64, k: i32) -> Result<CMat> {
        let distance = self.distance_to_spectrum(z);
        if distance <= SPECTRUM_TOL {
            return Err(SsfError::SpectrumHit { z, distance });
        }
        Ok(self.spectral_data().apply(|l| (c(l, 0.0) - z).powi(-k)))
    }

    /// Number of eigenvalues strictly below `lambda`.
    pub fn counting_function(&self, lambda: f64) -> usize {
        self.eigenvalues().iter().filter(|&&l| l < lambda).count()
    }

    /// Orthogonal projector E((−∞, 0)).
    pub fn spectral_projector_negative(&self) -> Result<CMat> {
        let z = Complex64::default();
        let distance = self.distance_to_spectrum(z);
        if distance <= SPECTRUM_TOL {
            return Err(SsfError::SpectrumHit { z, distance });
        }
        Ok(self.spectral_data().apply(|l| if l < 0.0 { c(1.0, 0.0) } else { c(0.0, 0.0) }))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        *self.eigenvalues().last().unwrap()
    }
}
