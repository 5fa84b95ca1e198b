use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, SsfError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SsfError {
    #[error("matrix is not Hermitian: asymmetry {asymmetry:.3e} exceeds 1e-12")]
    NotHermitian { asymmetry: f64 },
    #[error("matrix is not dissipative: imaginary part has eigenvalue {min_eigenvalue:.3e}")]
    NotDissipative { min_eigenvalue: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
    #[error("SignPathMismatch: repulsive path requires alpha < 0, got alpha = {alpha}")]
    SignPathMismatch { alpha: f64 },
    #[error("GridMismatch: {0}")]
    GridMismatch(String),

    #[error("SpectrumHit: z = {z} lies within {distance:.3e} of the spectrum")]
    SpectrumHit { z: Complex64, distance: f64 },
    #[error("BranchCutHit: eigenvalue {eigenvalue} lies on the logarithm branch cut")]
    BranchCutHit { eigenvalue: Complex64 },
    #[error("QuadratureFailure: estimated error {estimate:.3e} above tolerance {tolerance:.3e}")]
    QuadratureFailure { estimate: f64, tolerance: f64 },
    #[error("SingularValue: boundary function singular at z = {z} (smallest singular value {sigma_min:.3e})")]
    SingularValue { z: Complex64, sigma_min: f64 },
    #[error("SingularWeyl: Weyl function singular at z = {z}")]
    SingularWeyl { z: Complex64 },
    #[error("ExtrapolationUnstable: epsilon estimates diverge at lambda = {lambda}")]
    ExtrapolationUnstable { lambda: f64 },
    #[error("TailTooFat: omitted tail estimate {estimate:.3e} exceeds bound {bound:.3e}")]
    TailTooFat { estimate: f64, bound: f64 },
    #[error("NeumannEigenvalueHit: z = {z} is numerically a Neumann eigenvalue")]
    NeumannEigenvalueHit { z: Complex64 },
    #[error("DirichletEigenvalueHit: z = {z} is numerically a Dirichlet eigenvalue")]
    DirichletEigenvalueHit { z: Complex64 },
    #[error("SingularFactor: (beta N - I) singular at z = {z}")]
    SingularFactor { z: Complex64 },
    #[error("OdeSolveFailure: step size underflow at x = {x}")]
    OdeSolveFailure { x: f64 },
    #[error("RootFindingFailure: {0}")]
    RootFindingFailure(String),
    #[error("BranchViolation: z = {z} lies on the cut [0, inf) of sqrt")]
    BranchViolation { z: Complex64 },
}

impl SsfError {
    /// Input and validation problems, as opposed to numerical breakdowns.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            SsfError::NotHermitian { .. }
                | SsfError::NotDissipative { .. }
                | SsfError::InvalidInput(_)
                | SsfError::DimensionMismatch(_)
                | SsfError::InvariantViolation(_)
                | SsfError::SignPathMismatch { .. }
                | SsfError::GridMismatch(_)
        )
    }
}
