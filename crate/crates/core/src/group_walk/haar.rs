use crate::group_walk::element::{project_to_group, GroupElement};
use crate::linalg::*;
use ndarray_linalg::QR;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Haar-random unitary: QR of a complex Gaussian matrix with the diagonal of R made positive.
pub fn sample_haar_unitary<R: Rng + ?Sized>(q: usize, rng: &mut R) -> CMat {
    let z = CMat::from_shape_fn((q, q), |_| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(re, im) / std::f64::consts::SQRT_2
    });
    let (mut qm, r) = z.qr().expect("QR of a Gaussian matrix");
    for j in 0..q {
        let d = r[[j, j]];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { ONE };
        for i in 0..q {
            qm[[i, j]] *= ph;
        }
    }
    qm
}

pub fn sample_haar_with<R: Rng + ?Sized>(q: usize, rng: &mut R) -> GroupElement {
    project_to_group(&sample_haar_unitary(q, rng)).expect("Haar sample is unitary")
}

/// Haar-distributed projective element, reproducible from `seed`.
pub fn sample_haar(q: usize, seed: u64) -> GroupElement {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_haar_with(q, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn haar_character_moments() {
        let n = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let (mut s1, mut s1sq, mut s2, mut s2sq) = (ZERO, 0.0, 0.0, 0.0);
        for _ in 0..n {
            // the first moment uses the unitary before the sign of the projective
            // representative is fixed, which would bias Tr toward positive values
            let u = sample_haar_unitary(2, &mut rng);
            let t = trace(&u);
            s1 += t / 2.0;
            s1sq += (t / 2.0).norm_sqr();
            let g = project_to_group(&u).unwrap();
            let m = trace(&g.matrix()).norm_sqr();
            s2 += m;
            s2sq += m * m;
        }
        let nf = n as f64;
        let mean1 = s1 / nf;
        let se1 = (s1sq / nf / nf).sqrt();
        assert!(mean1.norm() < 5.0 * se1 * std::f64::consts::SQRT_2, "mean {mean1} se {se1}");
        let mean2 = s2 / nf;
        let se2 = ((s2sq / nf - mean2 * mean2) / nf).sqrt();
        assert!((mean2 - 1.0).abs() < 5.0 * se2, "mean |tr|^2 {mean2} se {se2}");
    }

    #[test]
    fn seeded_samples_are_reproducible() {
        assert_eq!(sample_haar(2, 99), sample_haar(2, 99));
        assert_eq!(sample_haar(3, 5), sample_haar(3, 5));
        assert_ne!(sample_haar(2, 1), sample_haar(2, 2));
    }

    #[test]
    fn haar_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for q in 2..6 {
            assert!(unitarity_residual(&sample_haar_unitary(q, &mut rng)) < 1e-12);
        }
    }
}
