//! Seeded random matrices and operator pairs for tests, suites and benches.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::{self, c, CMat};
use crate::opcore::HermitianOperator;
use crate::triple::PerturbationPair;

fn gaussian(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn random_complex(rows: usize, cols: usize, rng: &mut impl Rng) -> CMat {
    CMat::from_fn(rows, cols, |_, _| c(gaussian(rng), gaussian(rng)))
}

pub fn random_hermitian(n: usize, rng: &mut impl Rng) -> CMat {
    let m = random_complex(n, n, rng);
    (&m + m.adjoint()) * c(0.5, 0.0)
}

/// Haar-distributed unitary via QR with phase correction.
pub fn random_unitary(n: usize, rng: &mut impl Rng) -> CMat {
    let qr = random_complex(n, n, rng).qr();
    let (mut q, r) = qr.unpack();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { c(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

pub fn random_positive_definite(d: usize, rng: &mut impl Rng) -> CMat {
    let u = random_unitary(d, rng);
    let values: Vec<f64> = (0..d).map(|_| rng.random_range(0.5..2.0)).collect();
    linalg::spectral_apply(&values, &u, |x| c(x, 0.0))
}

pub fn random_indefinite(d: usize, rng: &mut impl Rng) -> CMat {
    let u = random_unitary(d, rng);
    let values: Vec<f64> = (0..d)
        .map(|k| {
            let mag = rng.random_range(0.5..2.0);
            if k % 2 == 0 { mag } else { -mag }
        })
        .collect();
    linalg::spectral_apply(&values, &u, |x| c(x, 0.0))
}

/// Random full-column-rank n×d coupling, normalized to operator norm about 1.
pub fn random_coupling(n: usize, d: usize, rng: &mut impl Rng) -> CMat {
    loop {
        let g = random_complex(n, d, rng);
        let norm = linalg::op_norm(&g);
        let g = g * c(1.0 / norm, 0.0);
        if linalg::min_singular(&g) > 0.05 {
            return g;
        }
    }
}

/// Random pair with dimensions n ∈ [d, n_max], d ∈ [1, d_max].
pub fn random_pair(n_max: usize, d_max: usize, positive: bool, rng: &mut impl Rng) -> PerturbationPair {
    let d = rng.random_range(1..=d_max);
    let n = rng.random_range(d.max(1)..=n_max.max(d));
    let a = HermitianOperator::new(random_hermitian(n, rng)).expect("Hermitian by construction");
    let g = random_coupling(n, d, rng);
    let t = if positive || d == 1 && rng.random_bool(0.5) {
        random_positive_definite(d, rng)
    } else {
        random_indefinite(d, rng)
    };
    PerturbationPair::new(a, g, t, None).expect("valid random pair")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{identity, max_abs};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 1..6 {
            let u = random_unitary(n, &mut rng);
            assert!(max_abs(&(u.adjoint() * &u - identity(n))) < 1e-12);
        }
    }

    #[test]
    fn positive_definite_has_positive_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let t = random_positive_definite(3, &mut rng);
        assert!(linalg::hermitian_eigenvalues(&t)[0] >= 0.5 - 1e-12);
    }
}
