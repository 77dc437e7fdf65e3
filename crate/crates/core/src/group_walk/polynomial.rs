//! Homogeneous polynomials in the four quaternion coordinates of a PU(2) element.
//!
//! A degree-d polynomial is stored as coefficients in the scaled monomial basis
//! `e_m(q) = sqrt(d!/m!) q^m`, which is orthonormal for the Bombieri inner product.
//! Substitution `q ↦ Q q` by an orthogonal Q therefore acts by an orthogonal matrix.

use crate::group_walk::element::{qmul, Quat};
use crate::linalg::*;
use ndarray::Array2;
use std::collections::HashMap;

#[derive(Clone, Debug)]
pub struct MonomialBasis {
    pub degree: usize,
    pub exps: Vec<[u8; 4]>,
    pub scale: Vec<f64>,
    index: HashMap<[u8; 4], usize>,
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

impl MonomialBasis {
    pub fn new(degree: usize) -> Self {
        let mut exps = Vec::new();
        let d = degree as u8;
        for a in (0..=d).rev() {
            for b in (0..=d - a).rev() {
                for cc in (0..=d - a - b).rev() {
                    exps.push([a, b, cc, d - a - b - cc]);
                }
            }
        }
        let df = factorial(degree);
        let scale = exps
            .iter()
            .map(|e| (df / e.iter().map(|&k| factorial(k as usize)).product::<f64>()).sqrt())
            .collect();
        let index = exps.iter().enumerate().map(|(i, e)| (*e, i)).collect();
        Self { degree, exps, scale, index }
    }

    pub fn dim(&self) -> usize {
        self.exps.len()
    }

    pub fn index_of(&self, e: &[u8; 4]) -> Option<usize> {
        self.index.get(e).copied()
    }

    /// Values of the scaled monomials at `q`.
    pub fn evaluate(&self, q: &Quat) -> Vec<f64> {
        self.exps
            .iter()
            .zip(&self.scale)
            .map(|(e, s)| s * (0..4).map(|k| q[k].powi(e[k] as i32)).product::<f64>())
            .collect()
    }
}

/// Number of degree-d monomials in four variables.
pub fn monomial_count(d: usize) -> usize {
    (d + 1) * (d + 2) * (d + 3) / 6
}

/// 4×4 matrix of the map `q ↦ l q r` (Hamilton products).
pub fn sandwich_matrix(l: &Quat, r: &Quat) -> [[f64; 4]; 4] {
    let mut m = [[0.0; 4]; 4];
    for j in 0..4 {
        let mut e = [0.0; 4];
        e[j] = 1.0;
        let col = qmul(&qmul(l, &e), r);
        for i in 0..4 {
            m[i][j] = col[i];
        }
    }
    m
}

/// Matrix S with `e_m(Q q) = Σ_k S[m, k] e_k(q)` in the degree-d scaled basis.
pub fn symmetric_power(qm: &[[f64; 4]; 4], basis: &MonomialBasis) -> Array2<f64> {
    symmetric_powers(qm, basis.degree).pop().expect("degree 0 is always present")
}

/// Symmetric powers of `qm` for every degree `0..=max_degree`.
pub fn symmetric_powers(qm: &[[f64; 4]; 4], max_degree: usize) -> Vec<Array2<f64>> {
    // unscaled expansion of (Qq)^m built degree by degree: P_m = (Qq)_i P_{m − e_i}
    let mut prev_basis = MonomialBasis::new(0);
    let mut prev = Array2::<f64>::from_elem((1, 1), 1.0);
    let mut out = vec![prev.clone()];
    for deg in 1..=max_degree {
        let cur_basis = MonomialBasis::new(deg);
        let mut cur = Array2::<f64>::zeros((cur_basis.dim(), cur_basis.dim()));
        for (mi, m) in cur_basis.exps.iter().enumerate() {
            let i = (0..4).find(|&k| m[k] > 0).expect("positive degree");
            let mut lower = *m;
            lower[i] -= 1;
            let li = prev_basis.index_of(&lower).expect("lower monomial");
            for (ki, k) in prev_basis.exps.iter().enumerate() {
                let coef = prev[[li, ki]];
                if coef == 0.0 {
                    continue;
                }
                for j in 0..4 {
                    if qm[i][j] == 0.0 {
                        continue;
                    }
                    let mut up = *k;
                    up[j] += 1;
                    cur[[mi, cur_basis.index_of(&up).expect("upper monomial")]] += coef * qm[i][j];
                }
            }
        }
        let mut scaled = cur.clone();
        for (mi, sm) in cur_basis.scale.iter().enumerate() {
            for (ki, sk) in cur_basis.scale.iter().enumerate() {
                scaled[[mi, ki]] *= sm / sk;
            }
        }
        out.push(scaled);
        prev = cur;
        prev_basis = cur_basis;
    }
    out
}

/// A complex quadratic form `Σ_ij A_ij q_i q_j` on quaternion coordinates.
#[derive(Clone, Debug)]
pub struct QuadraticForm {
    pub a: [[C64; 4]; 4],
}

impl QuadraticForm {
    pub fn evaluate(&self, q: &Quat) -> C64 {
        let mut s = ZERO;
        for i in 0..4 {
            for j in 0..4 {
                s += self.a[i][j] * q[i] * q[j];
            }
        }
        s
    }

    /// If the form equals `c |q|²` on the sphere, returns `c`.
    pub fn as_scalar(&self, tol: f64) -> Option<C64> {
        let c0 = self.a[0][0];
        for i in 0..4 {
            for j in 0..4 {
                let sym = (self.a[i][j] + self.a[j][i]) * 0.5;
                let target = if i == j { c0 } else { ZERO };
                if (sym - target).norm() > tol {
                    return None;
                }
            }
        }
        Some(c0)
    }

    /// Matrix K with `f(q) e_m(q) = Σ_n K[n, m] e_n(q)`, from degree d to d + 2.
    pub fn multiplication_matrix(&self, from: &MonomialBasis, to: &MonomialBasis) -> Array2<C64> {
        assert_eq!(to.degree, from.degree + 2);
        let mut k = Array2::<C64>::zeros((to.dim(), from.dim()));
        for (mi, m) in from.exps.iter().enumerate() {
            for i in 0..4 {
                for j in 0..4 {
                    let a = self.a[i][j];
                    if a == ZERO {
                        continue;
                    }
                    let mut up = *m;
                    up[i] += 1;
                    up[j] += 1;
                    let ni = to.index_of(&up).expect("raised monomial");
                    k[[ni, mi]] += a * from.scale[mi] / to.scale[ni];
                }
            }
        }
        k
    }
}

/// The quaternion units `U_0 = I, U_k = −iσ_k`, so that `u(q) = Σ_k q_k U_k`.
pub fn quaternion_units() -> [CMat; 4] {
    [eye(2), pauli_x().mapv(|z| -I * z), pauli_y().mapv(|z| -I * z), pauli_z().mapv(|z| -I * z)]
}

/// Quadratic forms of the entries of `u(q) τ u(q)†`: `forms[b][b']`.
pub fn conjugation_forms(tau: &CMat) -> [[QuadraticForm; 2]; 2] {
    let units = quaternion_units();
    let mut out: [[QuadraticForm; 2]; 2] = Default::default();
    for i in 0..4 {
        for j in 0..4 {
            let m = units[i].dot(tau).dot(&dagger(&units[j]));
            for b in 0..2 {
                for bp in 0..2 {
                    out[b][bp].a[i][j] = m[[b, bp]];
                }
            }
        }
    }
    out
}

impl Default for QuadraticForm {
    fn default() -> Self {
        Self { a: [[ZERO; 4]; 4] }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group_walk::element::su2_from_quat;
    use proptest::prelude::*;

    fn unit(v: [f64; 4]) -> Quat {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.map(|x| x / n)
    }

    fn apply(qm: &[[f64; 4]; 4], q: &Quat) -> Quat {
        let mut out = [0.0; 4];
        for i in 0..4 {
            for j in 0..4 {
                out[i] += qm[i][j] * q[j];
            }
        }
        out
    }

    #[test]
    fn counts() {
        for d in 0..8 {
            assert_eq!(MonomialBasis::new(d).dim(), monomial_count(d));
        }
    }

    proptest! {
        #[test]
        fn symmetric_power_substitution(a in proptest::array::uniform4(-1.0f64..1.0),
                                        b in proptest::array::uniform4(-1.0f64..1.0),
                                        x in proptest::array::uniform4(-1.0f64..1.0),
                                        d in 0usize..7) {
            prop_assume!(a.iter().map(|v| v*v).sum::<f64>() > 1e-3);
            prop_assume!(b.iter().map(|v| v*v).sum::<f64>() > 1e-3);
            let (l, r, q) = (unit(a), unit(b), x);
            let qm = sandwich_matrix(&l, &r);
            let basis = MonomialBasis::new(d);
            let s = symmetric_power(&qm, &basis);
            let lhs = basis.evaluate(&apply(&qm, &q));
            let rhs = basis.evaluate(&q);
            for m in 0..basis.dim() {
                let v: f64 = (0..basis.dim()).map(|k| s[[m, k]] * rhs[k]).sum();
                prop_assert!((v - lhs[m]).abs() < 1e-10);
            }
            // orthogonal substitution is orthogonal in the scaled basis
            let sst = s.dot(&s.t());
            for i in 0..basis.dim() {
                for j in 0..basis.dim() {
                    let t = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((sst[[i, j]] - t).abs() < 1e-10);
                }
            }
        }

        #[test]
        fn conjugation_forms_match_matrices(x in proptest::array::uniform4(-1.0f64..1.0)) {
            prop_assume!(x.iter().map(|v| v*v).sum::<f64>() > 1e-3);
            let q = unit(x);
            let tau = ndarray::arr2(&[[c(0.3, 0.0), c(0.1, -0.2)], [c(0.1, 0.2), c(0.7, 0.0)]]);
            let u = su2_from_quat(&q);
            let direct = u.dot(&tau).dot(&dagger(&u));
            let f = conjugation_forms(&tau);
            for b in 0..2 {
                for bp in 0..2 {
                    prop_assert!((f[b][bp].evaluate(&q) - direct[[b, bp]]).norm() < 1e-12);
                }
            }
        }

        #[test]
        fn multiplication_matrix_evaluates(x in proptest::array::uniform4(-1.0f64..1.0), d in 0usize..5) {
            let f = conjugation_forms(&ndarray::arr2(&[[c(1.0, 0.0), c(0.0, 0.5)], [c(0.0, -0.5), c(0.0, 0.0)]]));
            let from = MonomialBasis::new(d);
            let to = MonomialBasis::new(d + 2);
            let k = f[0][1].multiplication_matrix(&from, &to);
            let ev_from = from.evaluate(&x);
            let ev_to = to.evaluate(&x);
            let fx = f[0][1].evaluate(&x);
            for m in 0..from.dim() {
                let v: C64 = (0..to.dim()).map(|n| k[[n, m]] * ev_to[n]).sum();
                prop_assert!((v - fx * ev_from[m]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn trace_form_is_scalar() {
        let f = conjugation_forms(&eye(2));
        assert!((f[0][0].as_scalar(1e-12).unwrap() - ONE).norm() < 1e-12);
        assert!(f[0][1].as_scalar(1e-12).unwrap().norm() < 1e-12);
        let g = conjugation_forms(&ndarray::arr2(&[[ONE, ZERO], [ZERO, ZERO]]));
        assert!(g[0][0].as_scalar(1e-12).is_none());
    }
}
