//! Small dense complex linear algebra helpers.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = Array2<C64>;
pub type CVec = Array1<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn eye(n: usize) -> CMat {
    Array2::from_diag_elem(n, ONE)
}

pub fn dagger(m: &CMat) -> CMat {
    m.t().mapv(|z| z.conj())
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = CMat::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let x = a[[i, j]];
            if x == ZERO {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[[i * br + k, j * bc + l]] = x * b[[k, l]];
                }
            }
        }
    }
    out
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).fold(0.0, |acc, (x, y)| acc.max((x - y).norm()))
}

/// max |U†U − I|.
pub fn unitarity_residual(m: &CMat) -> f64 {
    let n = m.nrows();
    if m.ncols() != n {
        return f64::INFINITY;
    }
    max_abs_diff(&dagger(m).dot(m), &eye(n))
}

pub fn hermiticity_residual(m: &CMat) -> f64 {
    max_abs_diff(m, &dagger(m))
}

pub fn trace(m: &CMat) -> C64 {
    m.diag().iter().sum()
}

/// |v⟩⟨w|
pub fn outer(v: &CVec, w: &CVec) -> CMat {
    let mut out = CMat::zeros((v.len(), w.len()));
    for i in 0..v.len() {
        for j in 0..w.len() {
            out[[i, j]] = v[i] * w[j].conj();
        }
    }
    out
}

pub fn vec_norm(v: &CVec) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn pauli_x() -> CMat {
    ndarray::arr2(&[[ZERO, ONE], [ONE, ZERO]])
}

pub fn pauli_y() -> CMat {
    ndarray::arr2(&[[ZERO, -I], [I, ZERO]])
}

pub fn pauli_z() -> CMat {
    ndarray::arr2(&[[ONE, ZERO], [ZERO, -ONE]])
}

/// exp(−iθσ) = cos θ I − i sin θ σ for any Pauli-like σ with σ² = I.
pub fn exp_pauli(theta: f64, sigma: &CMat) -> CMat {
    let n = sigma.nrows();
    eye(n).mapv(|z| z * theta.cos()) - sigma.mapv(|z| z * I * theta.sin())
}

/// The state (|0⟩ + |1⟩ + ...)/√q.
pub fn plus_state(q: usize) -> CVec {
    CVec::from_elem(q, c(1.0 / (q as f64).sqrt(), 0.0))
}

pub fn basis_state(q: usize, k: usize) -> CVec {
    let mut v = CVec::zeros(q);
    v[k] = ONE;
    v
}

/// Eigen-decomposition of a Hermitian matrix: ascending eigenvalues and eigenvectors as columns.
///
/// The input is copied to column-major layout first; for row-major complex input
/// `ndarray-linalg` returns conjugated eigenvectors.
pub fn eigh(m: &CMat) -> (Vec<f64>, CMat) {
    use ndarray::ShapeBuilder;
    use ndarray_linalg::{Eigh, UPLO};
    let n = m.nrows();
    let mut f = CMat::zeros((n, n).f());
    f.assign(&(m + &dagger(m)).mapv(|z| z * 0.5));
    let (vals, vecs) = f.eigh(UPLO::Upper).expect("Hermitian eigendecomposition");
    (vals.to_vec(), vecs)
}

/// Validate a density matrix: Hermitian, unit trace, PSD up to a small floor.
pub fn density_check(rho: &CMat, tol: f64) -> std::result::Result<(), String> {
    use ndarray_linalg::{EigValsh, UPLO};
    let n = rho.nrows();
    if rho.ncols() != n {
        return Err("matrix is not square".into());
    }
    let h = hermiticity_residual(rho);
    if h > tol {
        return Err(format!("Hermiticity residual {h:.3e}"));
    }
    let tr = trace(rho);
    if (tr - ONE).norm() > tol {
        return Err(format!("trace {tr}"));
    }
    let sym = (rho + &dagger(rho)).mapv(|z| z * 0.5);
    let ev = sym.eigvalsh(UPLO::Upper).map_err(|e| e.to_string())?;
    let min = ev.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < -tol {
        return Err(format!("negative eigenvalue {min:.3e}"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_pauli_is_unitary_and_matches_series() {
        let th = 0.37;
        let u = exp_pauli(th, &pauli_y());
        assert!(unitarity_residual(&u) < 1e-14);
        // truncated Taylor series of exp(−iθσ)
        let gen = pauli_y().mapv(|z| -I * th * z);
        let mut term = eye(2);
        let mut sum = eye(2);
        for k in 1..30 {
            term = term.dot(&gen).mapv(|z| z / k as f64);
            sum = sum + &term;
        }
        assert!(max_abs_diff(&u, &sum) < 1e-14);
    }

    #[test]
    fn eigh_reconstructs() {
        let a = ndarray::arr2(&[
            [c(2.0, 0.0), c(0.5, 1.0), c(0.1, 0.3)],
            [c(0.5, -1.0), c(3.0, 0.0), c(0.0, 0.7)],
            [c(0.1, -0.3), c(0.0, -0.7), c(-1.0, 0.0)],
        ]);
        let (w, v) = eigh(&a);
        let d = CMat::from_diag(&ndarray::Array1::from_iter(w.iter().map(|&x| c(x, 0.0))));
        assert!(max_abs_diff(&a.dot(&v), &v.dot(&d)) < 1e-13);
        assert!(w.windows(2).all(|p| p[0] <= p[1]));
    }

    #[test]
    fn kron_dims_and_entries() {
        let k = kron(&pauli_x(), &pauli_z());
        assert_eq!(k.dim(), (4, 4));
        assert_eq!(k[[0, 2]], ONE);
        assert_eq!(k[[1, 3]], -ONE);
        assert_eq!(k[[0, 0]], ZERO);
    }
}
