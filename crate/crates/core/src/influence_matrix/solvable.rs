//! Certificate for initial pair states whose influence matrix is a product state.

use crate::error::{Error, Result};
use crate::gates::ControlledGateSet;
use crate::influence_matrix::brute::pair_marginals;
use crate::linalg::*;

const STEADY_TOL: f64 = 1e-12;
const STEADY_MAX_ITER: usize = 100_000;

/// A two-site initial block on (odd, even) sites, index `odd · q + even`.
#[derive(Clone, Debug)]
pub enum PairState {
    Pure(CVec),
    Mixed(CMat),
}

impl PairState {
    /// Density matrix, after checking normalization.
    pub fn density(&self) -> Result<CMat> {
        match self {
            PairState::Pure(v) => {
                let n = vec_norm(v);
                if (n - 1.0).abs() > 1e-10 {
                    return Err(Error::NotNormalized(n));
                }
                Ok(outer(v, v))
            }
            PairState::Mixed(r) => {
                density_check(r, 1e-10).map_err(Error::NotADensityMatrix)?;
                Ok(r.clone())
            }
        }
    }
}

/// Matrices `M_{oe} = B^e A^o` of the state as an MPS over pairs. Distinct pairs are
/// uncorrelated, so the outer bond is one-dimensional and each purification branch of
/// the block contributes its amplitudes as 1×1 matrices.
fn pair_transfer_ops(rho: &CMat) -> Vec<CMat> {
    let (vals, vecs) = eigh(rho);
    let mut ops = Vec::new();
    for (k, &lam) in vals.iter().enumerate() {
        if lam <= 1e-15 {
            continue;
        }
        for i in 0..rho.nrows() {
            let amp = vecs[[i, k]] * lam.sqrt();
            ops.push(CMat::from_elem((1, 1), amp));
        }
    }
    ops
}

/// Fixed point of `S ↦ Σ M† S M`, normalized to unit trace, by power iteration from the identity.
pub fn left_steady_state(ops: &[CMat]) -> Result<CMat> {
    let d = ops.first().map_or(1, |m| m.nrows());
    let mut s = eye(d).mapv(|z| z / d as f64);
    for _ in 0..STEADY_MAX_ITER {
        let mut next = CMat::zeros((d, d));
        for m in ops {
            next = next + dagger(m).dot(&s).dot(m);
        }
        let tr = trace(&next);
        if tr.norm() < 1e-300 {
            return Err(Error::DegenerateNorm(tr.norm()));
        }
        next.mapv_inplace(|z| z / tr);
        let delta = max_abs_diff(&next, &s);
        s = next;
        if delta < STEADY_TOL {
            return Ok(s);
        }
    }
    Err(Error::NonConvergentSteadyState(STEADY_MAX_ITER))
}

/// Max-norm residual of the solvability condition: the even-site state obtained by
/// tracing the odd site against the steady state must equal `Tr[S_D] I / q`.
pub fn check_solvable_state(state: &PairState, gs: &ControlledGateSet) -> Result<f64> {
    let q = gs.q();
    let rho = state.density()?;
    if rho.nrows() != q * q {
        return Err(Error::DimensionMismatch(format!("pair state of dimension {} for q = {q}", rho.nrows())));
    }
    let sd = left_steady_state(&pair_transfer_ops(&rho))?;
    let weight = trace(&sd);
    let (_, even) = pair_marginals(&rho, q);
    let target = eye(q).mapv(|z| z * weight / q as f64);
    Ok(max_abs_diff(&even.mapv(|z| z * weight), &target))
}
