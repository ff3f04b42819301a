//! Random matrix generators for the Monte-Carlo oracles.

use rand::Rng;
use rand_distr::StandardNormal;

use super::HermitianMat;
use crate::{CMat, Complex64};

/// Haar-distributed unitary from the QR factorization of a complex Gaussian
/// matrix, with the phases of `R`'s diagonal folded back into `Q`.
pub fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMat {
    let z = CMat::from_fn(n, n, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let qr = z.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Eigenvalues drawn log-uniformly in `[lo, hi]`.
pub fn log_uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..=hi.ln())).exp()
}

/// `U diag(lambdas) U^*` for a random unitary `U`.
pub fn rotate_diagonal<R: Rng + ?Sized>(lambdas: &[f64], rng: &mut R) -> HermitianMat {
    let u = random_unitary(lambdas.len(), rng);
    conjugate_diagonal(&u, lambdas)
}

pub fn conjugate_diagonal(u: &CMat, lambdas: &[f64]) -> HermitianMat {
    let d = HermitianMat::from_real_diagonal(lambdas);
    HermitianMat::new(u * d.as_matrix() * u.adjoint())
}

/// Positive-definite matrix with log-uniform spectrum in `[lo, hi]`.
pub fn random_pd<R: Rng + ?Sized>(n: usize, lo: f64, hi: f64, rng: &mut R) -> HermitianMat {
    let lambdas: Vec<f64> = (0..n).map(|_| log_uniform(rng, lo, hi)).collect();
    rotate_diagonal(&lambdas, rng)
}

/// Hermitian matrix with standard Gaussian entries.
pub fn random_hermitian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> HermitianMat {
    HermitianMat::new(CMat::from_fn(n, n, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    }))
}

/// `L A L^*` where `g = L L^*`: maps a matrix whose eigenvalues are given
/// relative to the identity to one with the same pencil eigenvalues relative to `g`.
pub fn push_forward(a: &HermitianMat, g_chol: &CMat) -> HermitianMat {
    HermitianMat::new(g_chol * a.as_matrix() * g_chol.adjoint())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pointwise::Pencil;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 2..=4 {
            let u = random_unitary(n, &mut rng);
            assert!((u.adjoint() * &u - CMat::identity(n, n)).norm() < 1e-13);
        }
    }

    #[test]
    fn push_forward_preserves_pencil() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = random_pd(3, 0.5, 2.0, &mut rng);
        let l = g.cholesky_factor().unwrap();
        let lambdas = [0.3, 1.0, 7.0];
        let a = push_forward(&rotate_diagonal(&lambdas, &mut rng), &l);
        let p = Pencil::new(&a, &g).unwrap();
        for (x, y) in p.lambdas().iter().zip(lambdas) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
