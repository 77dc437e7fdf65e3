//! Step tensors of the influence matrix and the exact builders.
//!
//! Step t maps the bond at cut t−1 to the bond at cut t. Its physical index is
//! `s = ((a q + a′) q + b) q + b′`: `(a, a′)` is the impurity entering the bath and
//! `(b, b′)` the impurity leaving it. The bath dephases the input, moves the group
//! element to `g′ = g_a g g_c` with `c` the value of the odd site consumed in this
//! step, and emits `u(g′) σ u(g′)†` with σ the state of the even site.
//!
//! A bond is labelled either by group elements, or (q = 2) by scaled monomials of
//! degree `2(T − t)` in the quaternion of g: everything downstream of cut t is such a
//! polynomial, so the moment basis bounds the bond by `monomial_count(2(T − t))`.
//! For paired baths the odd partner of the emitted even site is consumed one step
//! later, so its value rides along on the bond.

use crate::error::{Error, Result};
use crate::gates::{ControlledGateSet, ProductInitialState};
use crate::group_walk::element::{GroupElement, Quat};
use crate::group_walk::polynomial::{
    conjugation_forms, monomial_count, sandwich_matrix, symmetric_power, MonomialBasis,
};
use crate::group_walk::reachable::{generators, reachable_set_capped, ElementStore, DEFAULT_CAP, DEFAULT_TOL};
use crate::group_walk::multiply;
use crate::influence_matrix::brute::{pair_marginals, BathState};
use crate::influence_matrix::mps::TemporalMPS;
use crate::linalg::*;
use ndarray::{s, Array2, Array3};

/// Basis of one bond.
#[derive(Clone, Debug)]
pub enum BondBasis {
    Elements(Vec<GroupElement>),
    Moments { degree: usize },
    /// After compression.
    Anonymous(usize),
}

impl BondBasis {
    pub fn len(&self) -> usize {
        match self {
            BondBasis::Elements(v) => v.len(),
            BondBasis::Moments { degree } => monomial_count(*degree),
            BondBasis::Anonymous(n) => *n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Label of the bond at one cut. With `pending_odd` the index is `base · q + c`.
#[derive(Clone, Debug)]
pub struct BondLabel {
    pub basis: BondBasis,
    pub pending_odd: bool,
}

impl BondLabel {
    pub fn dim(&self, q: usize) -> usize {
        self.basis.len() * if self.pending_odd { q } else { 1 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BondStrategy {
    /// Group elements `H(t)` at every cut.
    Elements,
    /// q = 2: group elements while `#H(t)` is smaller than the moment basis, moments after.
    Compact,
}

#[inline]
pub(crate) fn phys(q: usize, a: usize, ap: usize, b: usize, bp: usize) -> usize {
    ((a * q + ap) * q + b) * q + bp
}

/// Everything the step tensors need to know about the bath.
pub(crate) struct StepContext {
    pub q: usize,
    pub gens: Vec<GroupElement>,
    pub quats: Option<Vec<Quat>>,
    /// Odd-site weights when the odd value is not carried on the bond.
    pub p_odd: Vec<f64>,
    /// Emitted even-site states, one per pending odd value (a single one for product baths).
    pub out_states: Vec<CMat>,
    pub paired: bool,
}

impl StepContext {
    pub fn new(gs: &ControlledGateSet, bath: &BathState) -> Result<Self> {
        let q = gs.q();
        if bath.q() != q {
            return Err(Error::DimensionMismatch("bath and gate set disagree on q".into()));
        }
        let gens = generators(gs);
        let quats = (q == 2).then(|| gens.iter().map(|g| g.quaternion().unwrap()).collect());
        let (p_odd, out_states, paired) = match bath {
            BathState::Product(st) => {
                (st.psi_o.iter().map(|z| z.norm_sqr()).collect(), vec![outer(&st.psi_e, &st.psi_e)], false)
            }
            BathState::Paired(pair) => {
                density_check(pair, 1e-10).map_err(Error::NotADensityMatrix)?;
                let (odd, _) = pair_marginals(pair, q);
                let sigma = (0..q)
                    .map(|c| CMat::from_shape_fn((q, q), |(e, ep)| pair[[c * q + e, c * q + ep]]))
                    .collect();
                (odd.diag().iter().map(|z| z.re.max(0.0)).collect(), sigma, true)
            }
        };
        Ok(Self { q, gens, quats, p_odd, out_states, paired })
    }

    /// Odd values used by a bond index with pending value `cin`: (c, weight).
    fn odd_sources(&self, in_pending: bool, cin: usize) -> Vec<(usize, f64)> {
        if in_pending {
            vec![(cin, 1.0)]
        } else {
            self.p_odd.iter().copied().enumerate().filter(|(_, w)| *w != 0.0).collect()
        }
    }

    /// Step tensor between two bond labels. `out` must use pending values iff the bath is paired.
    pub fn step_tensor(&self, input: &BondLabel, out: &BondLabel) -> Result<Array3<C64>> {
        let q = self.q;
        let qin = if input.pending_odd { q } else { 1 };
        let qout = self.out_states.len();
        debug_assert_eq!(out.pending_odd, self.paired);
        let mut w = Array3::<C64>::zeros((input.dim(q), q.pow(4), out.dim(q)));
        match (&input.basis, &out.basis) {
            (BondBasis::Elements(hin), BondBasis::Elements(hout)) => {
                let mut store = ElementStore::new(q, DEFAULT_TOL);
                for g in hout {
                    store.insert(g.clone());
                }
                for (gi, g) in hin.iter().enumerate() {
                    for cin in 0..qin {
                        for (c, pc) in self.odd_sources(input.pending_odd, cin) {
                            for a in 0..q {
                                let gp = multiply(&multiply(&self.gens[a], g)?, &self.gens[c])?;
                                let j = store.find(&gp).ok_or(Error::InconsistentReachableSets)?;
                                let u = gp.matrix();
                                for (cout, sigma) in self.out_states.iter().enumerate() {
                                    let rho = u.dot(sigma).dot(&dagger(&u));
                                    for b in 0..q {
                                        for bp in 0..q {
                                            w[[gi * qin + cin, phys(q, a, a, b, bp), j * qout + cout]] +=
                                                rho[[b, bp]] * pc;
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
            (BondBasis::Elements(hin), BondBasis::Moments { degree }) => {
                let basis = MonomialBasis::new(*degree);
                for (gi, g) in hin.iter().enumerate() {
                    for cin in 0..qin {
                        for (c, pc) in self.odd_sources(input.pending_odd, cin) {
                            for a in 0..q {
                                let gp = multiply(&multiply(&self.gens[a], g)?, &self.gens[c])?;
                                let x = gp.quaternion().ok_or(Error::UnsupportedDimension(q))?;
                                let ev = basis.evaluate(&x);
                                let u = gp.matrix();
                                for (cout, sigma) in self.out_states.iter().enumerate() {
                                    let rho = u.dot(sigma).dot(&dagger(&u));
                                    for b in 0..q {
                                        for bp in 0..q {
                                            let f = rho[[b, bp]] * pc;
                                            for (m, e) in ev.iter().enumerate() {
                                                w[[gi * qin + cin, phys(q, a, a, b, bp), m * qout + cout]] += f * e;
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
            (BondBasis::Moments { degree: din }, BondBasis::Moments { degree: dout }) => {
                if *din != dout + 2 {
                    return Err(Error::InvalidArgument("moment degrees must drop by two per step".into()));
                }
                let quats = self.quats.as_ref().ok_or(Error::UnsupportedDimension(q))?;
                let bin = MonomialBasis::new(*din);
                let bout = MonomialBasis::new(*dout);
                // K[cout][b][b'] : multiplication by ⟨b|u σ u†|b'⟩, degree dout → din
                let mult: Vec<Vec<Array2<C64>>> = self
                    .out_states
                    .iter()
                    .map(|sigma| {
                        let forms = conjugation_forms(sigma);
                        (0..4).map(|bb| forms[bb / 2][bb % 2].multiplication_matrix(&bout, &bin)).collect()
                    })
                    .collect();
                for a in 0..q {
                    for c in 0..q {
                        let sym = symmetric_power(&sandwich_matrix(&quats[a], &quats[c]), &bin);
                        let st = sym.t().mapv(|v| c64(v));
                        for cin in 0..qin {
                            let pc = self
                                .odd_sources(input.pending_odd, cin)
                                .into_iter()
                                .find(|(cc, _)| *cc == c)
                                .map_or(0.0, |(_, p)| p);
                            if pc == 0.0 {
                                continue;
                            }
                            for (cout, ks) in mult.iter().enumerate() {
                                for b in 0..q {
                                    for bp in 0..q {
                                        let block = st.dot(&ks[b * 2 + bp]);
                                        let mut view = w.slice_mut(s![
                                            cin..;qin,
                                            phys(q, a, a, b, bp),
                                            cout..;qout
                                        ]);
                                        view.scaled_add(c64(pc), &block);
                                    }
                                }
                            }
                        }
                    }
                }
            }
            _ => return Err(Error::InvalidArgument("unsupported bond transition".into())),
        }
        Ok(w)
    }
}

fn c64(v: f64) -> C64 {
    C64::new(v, 0.0)
}

/// Local tensor `W[(g, s, g′)]` for a product bath, from `H_in` to `H_out`.
pub fn im_local_tensor(
    gs: &ControlledGateSet,
    state: &ProductInitialState,
    h_in: &[GroupElement],
    h_out: &[GroupElement],
) -> Result<Array3<C64>> {
    let ctx = StepContext::new(gs, &BathState::Product(state.clone()))?;
    ctx.step_tensor(
        &BondLabel { basis: BondBasis::Elements(h_in.to_vec()), pending_odd: false },
        &BondLabel { basis: BondBasis::Elements(h_out.to_vec()), pending_odd: false },
    )
}

/// Bond labels for cuts 0..=T.
pub(crate) fn plan_bonds(gs: &ControlledGateSet, paired: bool, t: usize, strategy: BondStrategy) -> Result<Vec<BondLabel>> {
    let q = gs.q();
    let label = |basis, cut: usize| BondLabel { basis, pending_odd: paired && cut > 0 };
    let compact = strategy == BondStrategy::Compact && q == 2;
    if !compact {
        let rs = reachable_set_capped(gs, t, DEFAULT_TOL, DEFAULT_CAP)?;
        return Ok((0..=t).map(|k| label(BondBasis::Elements(rs.per_time(k).to_vec()), k)).collect());
    }
    // element bonds while they are smaller than the moment basis
    let mut cut = 0;
    let mut rs = reachable_set_capped(gs, 0, DEFAULT_TOL, 1)?;
    while cut < t {
        let cap = monomial_count(2 * (t - cut - 1));
        match reachable_set_capped(gs, cut + 1, DEFAULT_TOL, cap) {
            Ok(next) => {
                rs = next;
                cut += 1;
            }
            Err(Error::ExplosionGuard { .. }) => break,
            Err(e) => return Err(e),
        }
    }
    Ok((0..=t)
        .map(|k| {
            if k <= cut {
                label(BondBasis::Elements(rs.per_time(k).to_vec()), k)
            } else {
                label(BondBasis::Moments { degree: 2 * (t - k) }, k)
            }
        })
        .collect())
}

/// Generates the step tensors one at a time, with the right boundary summed into the last one.
pub(crate) struct StepIter {
    ctx: StepContext,
    pub bonds: Vec<BondLabel>,
    next: usize,
}

impl StepIter {
    pub fn new(gs: &ControlledGateSet, bath: &BathState, t: usize, strategy: BondStrategy) -> Result<Self> {
        if t == 0 {
            return Err(Error::InvalidArgument("the influence matrix needs T >= 1".into()));
        }
        let ctx = StepContext::new(gs, bath)?;
        let bonds = plan_bonds(gs, ctx.paired, t, strategy)?;
        Ok(Self { ctx, bonds, next: 1 })
    }

    pub fn q(&self) -> usize {
        self.ctx.q
    }
}

impl Iterator for StepIter {
    type Item = Result<Array3<C64>>;

    fn next(&mut self) -> Option<Self::Item> {
        let t = self.bonds.len() - 1;
        if self.next > t {
            return None;
        }
        let k = self.next;
        self.next += 1;
        let w = match self.ctx.step_tensor(&self.bonds[k - 1], &self.bonds[k]) {
            Ok(w) => w,
            Err(e) => return Some(Err(e)),
        };
        if k < t {
            return Some(Ok(w));
        }
        // top boundary: all-ones covector
        let summed = w.sum_axis(ndarray::Axis(2));
        Some(Ok(summed.insert_axis(ndarray::Axis(2))))
    }
}

/// Exact IM for a product bath with bonds labelled by `H(t)`.
pub fn build_exact_im(gs: &ControlledGateSet, state: &ProductInitialState, t: usize) -> Result<TemporalMPS> {
    build_im(gs, &BathState::Product(state.clone()), t, BondStrategy::Elements)
}

/// Exact IM for any bath and bond strategy.
pub fn build_im(gs: &ControlledGateSet, bath: &BathState, t: usize, strategy: BondStrategy) -> Result<TemporalMPS> {
    let mut it = StepIter::new(gs, bath, t, strategy)?;
    let mut tensors = Vec::with_capacity(t);
    for w in it.by_ref() {
        tensors.push(w?);
    }
    let labels = it.bonds[1..t].to_vec();
    Ok(TemporalMPS::new(it.q(), tensors, labels))
}
