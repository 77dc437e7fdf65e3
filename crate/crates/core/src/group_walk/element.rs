//! Phase-fixed projective unitaries.
//!
//! For q = 2 an element is stored as a unit quaternion `(w, x, y, z)` with
//! `u = w I − i (x σ^x + y σ^y + z σ^z)`, so that `u(p) u(q) = u(p ⊗ q)` with the
//! Hamilton product. The sign is fixed so the first component with magnitude above
//! 1e-12 is positive. For q > 2 the SU(q) representative is stored and the residual
//! Z_q phase is fixed on the first significant entry.

use crate::error::{Error, Result};
use crate::linalg::*;
use std::f64::consts::PI;

pub type Quat = [f64; 4];

const SIGN_EPS: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
enum Repr {
    Quat(Quat),
    Mat(CMat),
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroupElement {
    repr: Repr,
}

pub fn qmul(p: &Quat, q: &Quat) -> Quat {
    [
        p[0] * q[0] - p[1] * q[1] - p[2] * q[2] - p[3] * q[3],
        p[0] * q[1] + p[1] * q[0] + p[2] * q[3] - p[3] * q[2],
        p[0] * q[2] - p[1] * q[3] + p[2] * q[0] + p[3] * q[1],
        p[0] * q[3] + p[1] * q[2] - p[2] * q[1] + p[3] * q[0],
    ]
}

pub fn qconj(q: &Quat) -> Quat {
    [q[0], -q[1], -q[2], -q[3]]
}

pub fn qdot(p: &Quat, q: &Quat) -> f64 {
    p.iter().zip(q).map(|(a, b)| a * b).sum()
}

fn canonical_sign(mut q: Quat) -> Quat {
    for k in 0..4 {
        if q[k].abs() > SIGN_EPS {
            if q[k] < 0.0 {
                for v in q.iter_mut() {
                    *v = -*v;
                }
            }
            break;
        }
    }
    q
}

/// Quaternion of a 2×2 matrix proportional to an SU(2) element (not normalized).
pub fn quat_from_su2(s: &CMat) -> Quat {
    let w = (s[[0, 0]] + s[[1, 1]]).re / 2.0;
    let z = (s[[1, 1]] - s[[0, 0]]).im / 2.0;
    let y = (s[[1, 0]] - s[[0, 1]]).re / 2.0;
    let x = -(s[[1, 0]] + s[[0, 1]]).im / 2.0;
    [w, x, y, z]
}

pub fn su2_from_quat(q: &Quat) -> CMat {
    let [w, x, y, z] = *q;
    ndarray::arr2(&[[c(w, -z), c(-y, -x)], [c(y, -x), c(w, z)]])
}

fn det(m: &CMat) -> C64 {
    use ndarray_linalg::Determinant;
    if m.nrows() == 2 {
        return m[[0, 0]] * m[[1, 1]] - m[[0, 1]] * m[[1, 0]];
    }
    m.det().unwrap_or(ZERO)
}

fn canonical_phase(mut m: CMat) -> CMat {
    let q = m.nrows();
    let first = m.iter().copied().find(|z| z.norm() > SIGN_EPS);
    if let Some(z) = first {
        // choose k so that arg(ω^k z) ∈ (−π/q, π/q]
        let step = 2.0 * PI / q as f64;
        let arg = z.arg();
        let k = ((PI / q as f64 - arg) / step).floor();
        let phase = C64::from_polar(1.0, k * step);
        if k != 0.0 {
            m.mapv_inplace(|v| v * phase);
        }
    }
    m
}

impl GroupElement {
    pub fn identity(q: usize) -> Self {
        if q == 2 {
            GroupElement { repr: Repr::Quat([1.0, 0.0, 0.0, 0.0]) }
        } else {
            GroupElement { repr: Repr::Mat(canonical_phase(eye(q))) }
        }
    }

    /// Normalizes and sign-fixes an arbitrary nonzero quaternion.
    pub fn from_quaternion(q: Quat) -> Self {
        let n = qdot(&q, &q).sqrt();
        GroupElement { repr: Repr::Quat(canonical_sign(q.map(|v| v / n))) }
    }

    pub fn q(&self) -> usize {
        match &self.repr {
            Repr::Quat(_) => 2,
            Repr::Mat(m) => m.nrows(),
        }
    }

    pub fn quaternion(&self) -> Option<Quat> {
        match &self.repr {
            Repr::Quat(q) => Some(*q),
            Repr::Mat(_) => None,
        }
    }

    /// The special-unitary representative.
    pub fn matrix(&self) -> CMat {
        match &self.repr {
            Repr::Quat(q) => su2_from_quat(q),
            Repr::Mat(m) => m.clone(),
        }
    }

    pub fn canonicalize(&self) -> Self {
        match &self.repr {
            Repr::Quat(q) => GroupElement { repr: Repr::Quat(canonical_sign(*q)) },
            Repr::Mat(m) => GroupElement { repr: Repr::Mat(canonical_phase(m.clone())) },
        }
    }

    /// Projective closeness: SO(3) angle for q = 2, max-norm up to Z_q phases otherwise.
    pub fn is_close(&self, other: &Self, tol: f64) -> bool {
        match (&self.repr, &other.repr) {
            (Repr::Quat(a), Repr::Quat(b)) => quat_distance(a, b) <= tol,
            (Repr::Mat(a), Repr::Mat(b)) if a.nrows() == b.nrows() => mat_projective_gap(a, b) <= tol,
            _ => false,
        }
    }
}

/// SO(3) rotation angle between two unit quaternions, insensitive to their signs.
pub fn quat_distance(p: &Quat, q: &Quat) -> f64 {
    let mut dm = 0.0;
    let mut dp = 0.0;
    for k in 0..4 {
        dm += (p[k] - q[k]).powi(2);
        dp += (p[k] + q[k]).powi(2);
    }
    let chord = dm.min(dp).sqrt();
    4.0 * (chord / 2.0).min(1.0).asin()
}

fn mat_projective_gap(a: &CMat, b: &CMat) -> f64 {
    let q = a.nrows();
    (0..q)
        .map(|k| {
            let w = C64::from_polar(1.0, 2.0 * PI * k as f64 / q as f64);
            a.iter().zip(b.iter()).fold(0.0f64, |acc, (x, y)| acc.max((x - w * y).norm()))
        })
        .fold(f64::INFINITY, f64::min)
}

/// Canonical phase-fixed representative of a unitary.
pub fn project_to_group(u: &CMat) -> Result<GroupElement> {
    let q = u.nrows();
    if u.ncols() != q || q < 2 {
        return Err(Error::DimensionMismatch(format!("expected a square matrix, got {:?}", u.dim())));
    }
    let residual = unitarity_residual(u);
    if !(residual <= 1e-8) {
        return Err(Error::NonUnitary { index: 0, residual });
    }
    let d = det(u);
    let root = C64::from_polar(1.0, d.arg() / q as f64);
    let s = u.mapv(|z| z / root);
    if q == 2 {
        Ok(GroupElement::from_quaternion(quat_from_su2(&s)))
    } else {
        Ok(GroupElement { repr: Repr::Mat(canonical_phase(s)) })
    }
}

pub fn multiply(g1: &GroupElement, g2: &GroupElement) -> Result<GroupElement> {
    match (&g1.repr, &g2.repr) {
        (Repr::Quat(a), Repr::Quat(b)) => Ok(GroupElement { repr: Repr::Quat(canonical_sign(qmul(a, b))) }),
        (Repr::Mat(a), Repr::Mat(b)) if a.nrows() == b.nrows() => {
            Ok(GroupElement { repr: Repr::Mat(canonical_phase(a.dot(b))) })
        }
        _ => Err(Error::DimensionMismatch(format!("cannot multiply q = {} and q = {}", g1.q(), g2.q()))),
    }
}

pub fn inverse(g: &GroupElement) -> GroupElement {
    match &g.repr {
        Repr::Quat(a) => GroupElement { repr: Repr::Quat(canonical_sign(qconj(a))) },
        Repr::Mat(a) => GroupElement { repr: Repr::Mat(canonical_phase(dagger(a))) },
    }
}

/// SO(3) geodesic rotation angle of `g1⁻¹ g2`, in [0, π].
pub fn distance(g1: &GroupElement, g2: &GroupElement) -> Result<f64> {
    match (&g1.repr, &g2.repr) {
        (Repr::Quat(a), Repr::Quat(b)) => Ok(quat_distance(a, b)),
        (Repr::Mat(a), _) => Err(Error::UnsupportedDimension(a.nrows())),
        (_, Repr::Mat(b)) => Err(Error::UnsupportedDimension(b.nrows())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates::model_a;
    use crate::group_walk::haar::{sample_haar, sample_haar_unitary};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_and_phase_quotient() {
        let e = project_to_group(&eye(2)).unwrap();
        assert_eq!(e.quaternion(), Some([1.0, 0.0, 0.0, 0.0]));
        let ph = eye(2).mapv(|z| z * C64::from_polar(1.0, PI / 7.0));
        assert!(project_to_group(&ph).unwrap().is_close(&e, 1e-12));
        let a = project_to_group(&pauli_z().mapv(|z| -I * z)).unwrap();
        let b = project_to_group(&pauli_z()).unwrap();
        let (qa, qb) = (a.quaternion().unwrap(), b.quaternion().unwrap());
        for k in 0..4 {
            assert!((qa[k] - qb[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn hamilton_product_matches_matrix_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let u = sample_haar_unitary(2, &mut rng);
            let v = sample_haar_unitary(2, &mut rng);
            let direct = project_to_group(&u.dot(&v)).unwrap();
            let prod = multiply(&project_to_group(&u).unwrap(), &project_to_group(&v).unwrap()).unwrap();
            assert!(direct.is_close(&prod, 1e-10));
            let m = su2_from_quat(&prod.quaternion().unwrap());
            assert!(project_to_group(&m).unwrap().is_close(&prod, 1e-12));
        }
    }

    #[test]
    fn multiply_identity_and_inverse() {
        let e = GroupElement::identity(2);
        for seed in 0..100 {
            let g = sample_haar(2, seed);
            assert!(multiply(&e, &g).unwrap().is_close(&g, 1e-12));
            assert!(distance(&multiply(&g, &inverse(&g)).unwrap(), &e).unwrap() < 1e-10);
        }
    }

    #[test]
    fn quarter_rotation_closes_after_four() {
        let gs = model_a(0.25);
        let a = project_to_group(&gs.controlled()[0]).unwrap();
        let a2 = multiply(&a, &a).unwrap();
        let rz_pi = GroupElement::from_quaternion([0.0, 0.0, 0.0, 1.0]);
        assert!(distance(&a2, &rz_pi).unwrap() < 1e-12);
        assert!((distance(&a2, &GroupElement::identity(2)).unwrap() - PI).abs() < 1e-12);
        let a4 = multiply(&a2, &a2).unwrap();
        assert!(distance(&a4, &GroupElement::identity(2)).unwrap() < 1e-12);
    }

    #[test]
    fn mismatched_dimensions_and_unsupported_distance() {
        let g2 = GroupElement::identity(2);
        let g3 = GroupElement::identity(3);
        assert!(matches!(multiply(&g2, &g3), Err(Error::DimensionMismatch(_))));
        assert!(matches!(distance(&g3, &g3), Err(Error::UnsupportedDimension(3))));
    }

    #[test]
    fn qutrit_projection_is_phase_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for k in 0..20 {
            let u = sample_haar_unitary(3, &mut rng);
            let ph = u.mapv(|z| z * C64::from_polar(1.0, 0.37 * k as f64));
            let a = project_to_group(&u).unwrap();
            let b = project_to_group(&ph).unwrap();
            assert!(max_abs_diff(&a.matrix(), &b.matrix()) < 1e-10);
            assert!((det(&a.matrix()) - ONE).norm() < 1e-10);
            assert_eq!(a.canonicalize(), a);
        }
    }
}
