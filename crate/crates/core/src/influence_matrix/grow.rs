//! Step-by-step construction of a bond-truncated influence matrix.

use crate::error::{Error, Result};
use crate::gates::{ControlledGateSet, ProductInitialState};
use crate::influence_matrix::brute::BathState;
use crate::influence_matrix::exact::{BondStrategy, StepIter};
use crate::influence_matrix::mps::{compress, TemporalMPS};
use crate::linalg::*;
use ndarray::{s, Array2, Axis};
use ndarray_linalg::SVD;

/// Singular values below this fraction of the largest are always dropped.
const GROW_CUTOFF: f64 = 1e-14;

/// IM for a product bath built one step at a time, truncating the open bond to `chi_max`
/// after every step and finishing with a canonical [`compress`].
pub fn grow_im_truncated(
    gs: &ControlledGateSet,
    state: &ProductInitialState,
    t: usize,
    chi_max: usize,
) -> Result<TemporalMPS> {
    grow_im(gs, &BathState::Product(state.clone()), t, chi_max)
}

pub fn grow_im(gs: &ControlledGateSet, bath: &BathState, t: usize, chi_max: usize) -> Result<TemporalMPS> {
    if chi_max == 0 {
        return Err(Error::InvalidArgument("chi_max must be at least 1".into()));
    }
    let steps = StepIter::new(gs, bath, t, BondStrategy::Compact)?;
    let q = steps.q();
    let mut tensors = Vec::with_capacity(t);
    let mut carry = Array2::<C64>::from_elem((1, 1), ONE);
    for (k, w) in steps.enumerate() {
        let w = w?;
        let (l, p, r) = w.dim();
        let flat = carry.dot(&w.to_shape((l, p * r)).unwrap());
        let chi_prev = carry.nrows();
        if k + 1 == t {
            tensors.push(flat.to_shape((chi_prev, p, r)).unwrap().to_owned());
            break;
        }
        let m = flat.to_shape((chi_prev * p, r)).unwrap().to_owned();
        let (u, sv, vt) = m.svd(true, true)?;
        let (u, vt) = (u.unwrap(), vt.unwrap());
        let smax = sv.first().copied().unwrap_or(0.0);
        let keep = sv.iter().take(chi_max).filter(|&&v| v > GROW_CUTOFF * smax).count().max(1);
        tensors.push(u.slice(s![.., ..keep]).to_shape((chi_prev, p, keep)).unwrap().to_owned());
        carry = vt.slice(s![..keep, ..]).to_owned();
        for (i, mut row) in carry.axis_iter_mut(Axis(0)).enumerate() {
            row.mapv_inplace(|z| z * sv[i]);
        }
    }
    let labels = Vec::new();
    let mps = TemporalMPS::new(q, tensors, labels);
    Ok(compress(&mps, chi_max, GROW_CUTOFF)?.mps)
}
