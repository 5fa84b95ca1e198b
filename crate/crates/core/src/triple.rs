//! Finite-rank perturbation pairs `B = A + G T G*` with their γ-field and Weyl function.

use num_complex::Complex64;

use crate::error::{Result, SsfError};
use crate::linalg::{self, c, CMat};
use crate::nevlog::NevanlinnaFunction;
use crate::opcore::{HermitianOperator, SPECTRUM_TOL};

pub const RANK_TOL: f64 = 1e-10;
pub const INVERTIBLE_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct PerturbationPair {
    a_op: HermitianOperator,
    b_op: HermitianOperator,
    g_map: CMat,
    t_coupling: CMat,
    t_inverse: CMat,
    t_eigenvalues: Vec<f64>,
    sign_checkpoint: Option<f64>,
}

impl PerturbationPair {
    pub fn new(a_op: HermitianOperator, g_map: CMat, t_coupling: CMat, sign_checkpoint: Option<f64>) -> Result<Self> {
        let n = a_op.dim();
        let d = g_map.ncols();
        if g_map.nrows() != n || d == 0 {
            return Err(SsfError::DimensionMismatch(format!("G must be {n}x d with d >= 1, got {}x{}", g_map.nrows(), d)));
        }
        if t_coupling.nrows() != d || t_coupling.ncols() != d {
            return Err(SsfError::DimensionMismatch(format!("T must be {d}x{d}")));
        }
        if d > n || linalg::min_singular(&g_map) <= RANK_TOL {
            return Err(SsfError::InvariantViolation("G must be injective (full column rank)".into()));
        }
        let t_op = HermitianOperator::new(t_coupling)?;
        let t_eigenvalues = t_op.eigenvalues().to_vec();
        if t_eigenvalues.iter().any(|l| l.abs() <= INVERTIBLE_TOL) {
            return Err(SsfError::InvariantViolation("T must be invertible".into()));
        }
        let t_inverse = t_op.spectral_data().apply(|l| c(1.0 / l, 0.0));
        let t_coupling = t_op.matrix().clone();
        let b = a_op.matrix() + &g_map * &t_coupling * g_map.adjoint();
        let b_op = HermitianOperator::from_hermitian_unchecked(linalg::re_part(&b));
        let pair = Self { a_op, b_op, g_map, t_coupling, t_inverse, t_eigenvalues, sign_checkpoint };
        if let Some(zeta) = sign_checkpoint {
            pair.check_sign_condition(zeta)?;
        }
        Ok(pair)
    }

    fn check_sign_condition(&self, zeta: f64) -> Result<()> {
        let z = c(zeta, 0.0);
        if self.a_op.distance_to_spectrum(z) <= SPECTRUM_TOL || self.b_op.distance_to_spectrum(z) <= SPECTRUM_TOL {
            return Err(SsfError::InvariantViolation(format!("checkpoint zeta0 = {zeta} lies in the spectrum")));
        }
        if self.is_t_positive() && zeta < self.spectral_hull().0 {
            let diff = self.a_op.resolvent(z)? - self.b_op.resolvent(z)?;
            let min = linalg::hermitian_eigenvalues(&diff)[0];
            let scale = linalg::op_norm(&diff).max(1.0);
            if min < -1e-10 * scale {
                return Err(SsfError::InvariantViolation(format!(
                    "sign condition fails at zeta0 = {zeta}: resolvent difference has eigenvalue {min:e}"
                )));
            }
        }
        Ok(())
    }

    pub fn a_op(&self) -> &HermitianOperator {
        &self.a_op
    }

    pub fn b_op(&self) -> &HermitianOperator {
        &self.b_op
    }

    pub fn g_map(&self) -> &CMat {
        &self.g_map
    }

    pub fn t_coupling(&self) -> &CMat {
        &self.t_coupling
    }

    pub fn sign_checkpoint(&self) -> Option<f64> {
        self.sign_checkpoint
    }

    pub fn dim(&self) -> usize {
        self.a_op.dim()
    }

    pub fn boundary_dim(&self) -> usize {
        self.g_map.ncols()
    }

    /// T ≻ 0, the encoding of the sign condition.
    pub fn is_t_positive(&self) -> bool {
        self.t_eigenvalues[0] > 0.0
    }

    pub fn negative_index(&self) -> usize {
        self.t_eigenvalues.iter().filter(|&&l| l < 0.0).count()
    }

    /// `[min, max]` of σ(A) ∪ σ(B).
    pub fn spectral_hull(&self) -> (f64, f64) {
        (
            self.a_op.min_eigenvalue().min(self.b_op.min_eigenvalue()),
            self.a_op.max_eigenvalue().max(self.b_op.max_eigenvalue()),
        )
    }

    pub fn distance_to_spectra(&self, z: Complex64) -> f64 {
        self.a_op.distance_to_spectrum(z).min(self.b_op.distance_to_spectrum(z))
    }

    /// γ(z) = (A − z)^{-1} G
    pub fn gamma(&self, z: Complex64) -> Result<CMat> {
        Ok(self.a_op.resolvent(z)? * &self.g_map)
    }

    pub fn gamma_field(&self) -> GammaField<'_> {
        GammaField { pair: self }
    }

    /// M(z) = T^{-1} + G*(A − z)^{-1}G
    pub fn weyl(&self, z: Complex64) -> Result<CMat> {
        Ok(&self.t_inverse + self.g_map.adjoint() * self.gamma(z)?)
    }

    /// k! G*(A − z)^{-(k+1)} G
    pub fn weyl_derivative(&self, z: Complex64, k: u32) -> Result<CMat> {
        if k == 0 {
            return Err(SsfError::InvalidInput("derivative order must be positive".into()));
        }
        let factorial: f64 = (1..=k).map(f64::from).product();
        let power = self.a_op.resolvent_power(z, k as i32 + 1)?;
        Ok(self.g_map.adjoint() * power * &self.g_map * c(factorial, 0.0))
    }

    pub fn krein_scale(&self, z: Complex64) -> Result<f64> {
        let r = linalg::op_norm(&self.a_op.resolvent(z)?);
        let g = linalg::op_norm(&self.g_map);
        Ok(1.0 + r * r * g * g)
    }

    /// ‖(B − z)^{-1} − (A − z)^{-1} + γ(z) M(z)^{-1} γ(z̄)*‖
    pub fn krein_residual(&self, z: Complex64) -> Result<f64> {
        let rb = self.b_op.resolvent(z)?;
        let ra = self.a_op.resolvent(z)?;
        let m = self.weyl(z)?;
        let scale = linalg::max_abs(&m).max(1.0);
        if linalg::min_singular(&m) <= 1e-12 * scale {
            return Err(SsfError::SingularWeyl { z });
        }
        let m_inv = linalg::inverse(&m).ok_or(SsfError::SingularWeyl { z })?;
        let gamma = self.gamma(z)?;
        let gamma_bar_adj = self.gamma(z.conj())?.adjoint();
        Ok(linalg::op_norm(&(rb - ra + gamma * m_inv * gamma_bar_adj)))
    }

    pub fn weyl_function(&self) -> WeylFunction<'_> {
        WeylFunction { pair: self }
    }

    /// Comparison pairs `{C, A}` and `{C, B}` with `C = A − sGG*` and both
    /// couplings positive, so that ξ = ξ_B − ξ_A for an indefinite `T`.
    pub fn comparison_pairs(&self) -> Result<(PerturbationPair, PerturbationPair)> {
        let d = self.boundary_dim();
        let s = 1.0 + (-self.t_eigenvalues[0]).max(0.0);
        let gg = &self.g_map * self.g_map.adjoint();
        let comparison = HermitianOperator::from_hermitian_unchecked(linalg::re_part(&(self.a_op.matrix() - &gg * c(s, 0.0))));
        let to_a = PerturbationPair::new(comparison.clone(), self.g_map.clone(), linalg::identity(d) * c(s, 0.0), None)?;
        let t_b = &self.t_coupling + linalg::identity(d) * c(s, 0.0);
        let to_b = PerturbationPair::new(comparison, self.g_map.clone(), t_b, None)?;
        Ok((to_a, to_b))
    }
}

pub struct GammaField<'a> {
    pair: &'a PerturbationPair,
}

impl GammaField<'_> {
    pub fn evaluate(&self, z: Complex64) -> Result<CMat> {
        self.pair.gamma(z)
    }
}

/// The Weyl function of a pair as a Nevanlinna evaluator.
#[derive(Clone, Copy)]
pub struct WeylFunction<'a> {
    pair: &'a PerturbationPair,
}

impl NevanlinnaFunction for WeylFunction<'_> {
    fn dim(&self) -> usize {
        self.pair.boundary_dim()
    }
    fn evaluate(&self, z: Complex64) -> Result<CMat> {
        self.pair.weyl(z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{identity, im_part, max_abs, I};
    use crate::sampling;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar(x: f64) -> CMat {
        CMat::from_element(1, 1, c(x, 0.0))
    }

    fn rank_one(t: f64) -> PerturbationPair {
        PerturbationPair::new(HermitianOperator::from_real_diagonal(&[0.0]).unwrap(), scalar(1.0), scalar(t), None).unwrap()
    }

    #[test]
    fn weyl_examples() {
        let p = rank_one(1.0);
        assert!((p.weyl(I).unwrap()[(0, 0)] - c(1.0, 1.0)).norm() < 1e-15);
        assert!((p.weyl(c(-1.0, 0.0)).unwrap()[(0, 0)] - c(2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn weyl_tends_to_inverse_coupling() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = sampling::random_unitary(4, &mut rng);
        let g = u.columns(0, 2).into_owned();
        let a = HermitianOperator::new(sampling::random_hermitian(4, &mut rng)).unwrap();
        let p = PerturbationPair::new(a, g, identity(2), None).unwrap();
        let m = p.weyl(c(0.0, 1e8)).unwrap();
        assert!(max_abs(&(m - identity(2))) < 1e-7);
    }

    #[test]
    fn gamma_examples() {
        let p = rank_one(1.0);
        assert!((p.gamma(I).unwrap()[(0, 0)] - I).norm() < 1e-15);
        let a = HermitianOperator::from_real_diagonal(&[1.0, 2.0]).unwrap();
        let g = CMat::from_column_slice(2, 1, &[c(1.0, 0.0), c(0.0, 0.0)]);
        let p = PerturbationPair::new(a, g.clone(), scalar(1.0), None).unwrap();
        assert!(max_abs(&(p.gamma_field().evaluate(c(0.0, 0.0)).unwrap() - g)) < 1e-15);
    }

    #[test]
    fn gamma_derivative_matches_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = sampling::random_pair(5, 2, true, &mut rng);
        let z = c(0.3, 0.7);
        let h = 1e-4;
        let fd = (p.gamma(z + h).unwrap() - p.gamma(z - h).unwrap()) / c(2.0 * h, 0.0);
        let exact = p.a_op().resolvent(z).unwrap() * p.gamma(z).unwrap();
        assert!(max_abs(&(fd - exact)) < 1e-6);
    }

    #[test]
    fn krein_examples() {
        for (t, g) in [(1.0, 1.0), (-1.0, 1.0), (1.0, 10.0)] {
            let p = PerturbationPair::new(HermitianOperator::from_real_diagonal(&[0.0]).unwrap(), scalar(g), scalar(t), None).unwrap();
            let res = p.krein_residual(I).unwrap();
            assert!(res <= 1e-10 * p.krein_scale(I).unwrap(), "{res}");
        }
        let p = rank_one(1.0);
        let diff = p.b_op().resolvent(I).unwrap() - p.a_op().resolvent(I).unwrap();
        assert!((diff[(0, 0)] - c(0.5, -0.5)).norm() < 1e-15);
        assert!(p.krein_residual(I).unwrap() < 1e-14);
    }

    #[test]
    fn weyl_derivative_examples() {
        let p = rank_one(1.0);
        assert!((p.weyl_derivative(I, 1).unwrap()[(0, 0)] + 1.0).norm() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = sampling::random_pair(3, 3, true, &mut rng);
        let z = c(1.0, 2.0);
        let first = p.weyl_derivative(z, 1).unwrap();
        let product = p.gamma(z.conj()).unwrap().adjoint() * p.gamma(z).unwrap();
        assert!(max_abs(&(first - product)) < 1e-13);
        let h = 1e-3;
        let second_fd = (p.weyl(z + h).unwrap() - p.weyl(z).unwrap() * c(2.0, 0.0) + p.weyl(z - h).unwrap()) / c(h * h, 0.0);
        assert!(max_abs(&(p.weyl_derivative(z, 2).unwrap() - second_fd)) < 1e-4);
    }

    #[test]
    fn invalid_pairs_are_rejected() {
        let a = HermitianOperator::from_real_diagonal(&[0.0, 1.0]).unwrap();
        let g = CMat::from_column_slice(2, 1, &[c(0.0, 0.0), c(0.0, 0.0)]);
        assert!(PerturbationPair::new(a.clone(), g, scalar(1.0), None).is_err());
        let g = CMat::from_column_slice(2, 1, &[c(1.0, 0.0), c(0.0, 0.0)]);
        assert!(PerturbationPair::new(a.clone(), g.clone(), scalar(0.0), None).is_err());
        assert!(PerturbationPair::new(a, g, scalar(1.0), Some(0.0)).is_err());
    }

    #[test]
    fn checkpoint_positivity() {
        let p = PerturbationPair::new(HermitianOperator::from_real_diagonal(&[0.0]).unwrap(), scalar(1.0), scalar(1.0), Some(-1.0)).unwrap();
        let m = p.weyl(c(-1.0, 0.0)).unwrap();
        assert!(linalg::hermitian_eigenvalues(&m)[0] > 0.0);
    }

    #[test]
    fn comparison_pairs_reproduce_both_operators() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let p = sampling::random_pair(6, 3, false, &mut rng);
        let (to_a, to_b) = p.comparison_pairs().unwrap();
        assert!(to_a.is_t_positive() && to_b.is_t_positive());
        assert!(max_abs(&(to_a.b_op().matrix() - p.a_op().matrix())) < 1e-12);
        assert!(max_abs(&(to_b.b_op().matrix() - p.b_op().matrix())) < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn krein_residual_is_small(seed in 0u64..1_000_000, x in -3.0f64..3.0, y in -2.0f64..2.0, positive in any::<bool>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = sampling::random_pair(8, 3, positive, &mut rng);
            let z = if y.abs() < 1e-3 {
                // real point inside a gap of σ(A) ∪ σ(B)
                let mut pts: Vec<f64> = p.a_op().eigenvalues().iter().chain(p.b_op().eigenvalues()).copied().collect();
                pts.sort_by(f64::total_cmp);
                let k = rng.random_range(0..pts.len() - 1);
                c(0.5 * (pts[k] + pts[k + 1]), 0.0)
            } else {
                c(x, y)
            };
            prop_assume!(p.distance_to_spectra(z) > 1e-6);
            match p.krein_residual(z) {
                Ok(res) => prop_assert!(res <= 1e-10 * p.krein_scale(z).unwrap(), "residual {}", res),
                Err(SsfError::SingularWeyl { .. }) => {}
                Err(e) => prop_assert!(false, "{}", e),
            }
        }

        #[test]
        fn weyl_is_nevanlinna(seed in 0u64..1_000_000, x in -3.0f64..3.0, y in 1e-3f64..3.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = sampling::random_pair(8, 3, false, &mut rng);
            let z = c(x, y);
            let m = p.weyl(z).unwrap();
            prop_assert!(linalg::hermitian_eigenvalues(&im_part(&m))[0] >= -1e-10);
            let gamma = p.gamma(z).unwrap();
            let expected = gamma.adjoint() * &gamma * c(y, 0.0);
            prop_assert!(max_abs(&(im_part(&m) - expected)) <= 1e-10 * max_abs(&m).max(1.0));
            prop_assert!(max_abs(&(p.weyl(z.conj()).unwrap() - m.adjoint())) <= 1e-12 * max_abs(&m).max(1.0));
        }

        #[test]
        fn two_point_identity(seed in 0u64..1_000_000, x in -3.0f64..3.0, y in -3.0f64..3.0, x0 in -3.0f64..3.0, y0 in 0.1f64..3.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = sampling::random_pair(8, 3, true, &mut rng);
            let (z, z0) = (c(x, y), c(x0, y0));
            prop_assume!(p.a_op().distance_to_spectrum(z) > 1e-3);
            let lhs = p.weyl(z).unwrap() - p.weyl(z0).unwrap().adjoint();
            let rhs = p.gamma(z0).unwrap().adjoint() * p.gamma(z).unwrap() * (z - z0.conj());
            let scale = max_abs(&lhs).max(1.0);
            prop_assert!(max_abs(&(lhs - rhs)) <= 1e-10 * scale);
        }

        #[test]
        fn gamma_transport(seed in 0u64..1_000_000, x in -3.0f64..3.0, y in 0.05f64..3.0, x0 in -3.0f64..3.0, y0 in -3.0f64..-0.05) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = sampling::random_pair(8, 3, true, &mut rng);
            let (z, z0) = (c(x, y), c(x0, y0));
            let ra = p.a_op().resolvent(z).unwrap();
            let transported = (identity(p.dim()) + ra * (z - z0)) * p.gamma(z0).unwrap();
            let direct = p.gamma(z).unwrap();
            prop_assert!(max_abs(&(transported - &direct)) <= 1e-10 * max_abs(&direct).max(1.0));
        }

        #[test]
        fn checkpoint_below_spectrum_gives_positive_weyl(seed in 0u64..1_000_000, gap in 0.01f64..2.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = sampling::random_pair(8, 3, true, &mut rng);
            let zeta = p.a_op().min_eigenvalue() - gap;
            let m = p.weyl(c(zeta, 0.0)).unwrap();
            prop_assert!(linalg::hermitian_eigenvalues(&m)[0] > 0.0);
        }
    }
}
