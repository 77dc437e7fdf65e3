//! Exact sums over all walk trajectories.
//!
//! Two independent routes are provided. Forward enumeration propagates the weighted
//! distribution over distinct group elements. For q = 2 the backward route propagates
//! `F_t(g) = E[f_O(g_T) | g_t = g]`, which is a homogeneous polynomial in the
//! quaternion of g: each step substitutes `q ↦ q_b q q_a` and multiplies by the
//! quadratic branch probability. Its degree stays fixed when the branch probabilities
//! do not depend on g (erase-and-prepare channels), so long times are cheap.

use crate::error::{Error, Result};
use crate::gates::{ControlledGateSet, ImpurityObservable, ProductInitialState};
use crate::group_walk::covering::CoveringGrid;
use crate::group_walk::element::GroupElement;
use crate::group_walk::polynomial::{
    monomial_count, sandwich_matrix, symmetric_powers, MonomialBasis, QuadraticForm,
};
use crate::group_walk::reachable::{generators, ElementStore, DEFAULT_CAP};
use crate::group_walk::multiply;
use crate::linalg::*;
use crate::stochastic::channel::QuantumChannel;
use crate::stochastic::walk::{channel_diag_forms, observable_form, odd_weights, Kernel, WalkConfig};
use ndarray::Array1;
use std::collections::BTreeMap;

/// Largest polynomial space used before falling back to enumeration.
const POLY_MAX_DIM: usize = 3000;
const ENUM_TOL: f64 = 1e-9;

fn validate(
    gs: &ControlledGateSet,
    state: &ProductInitialState,
    rho_imp: &CMat,
    channel: &QuantumChannel,
    obs: &CMat,
) -> Result<()> {
    let q = gs.q();
    if state.q() != q || rho_imp.dim() != (q, q) || channel.q() != q || obs.dim() != (q, q) {
        return Err(Error::DimensionMismatch("transfer inputs disagree on q".into()));
    }
    density_check(rho_imp, 1e-10).map_err(Error::NotADensityMatrix)?;
    let r = channel.tp_residual();
    if r > 1e-10 {
        return Err(Error::NonTracePreserving(r));
    }
    Ok(())
}

/// Complex first-step weights `⟨b|X|b⟩ |⟨a|ψ_o⟩|²` with targets `g_b g_a`.
fn first_step(gs: &ControlledGateSet, x: &CMat, psi_o: &CVec) -> Vec<(C64, GroupElement)> {
    let gens = generators(gs);
    let pa = odd_weights(psi_o);
    let mut out = Vec::new();
    for b in 0..gs.q() {
        for (a, &wa) in pa.iter().enumerate() {
            let w = x[[b, b]] * wa;
            if w != ZERO {
                out.push((w, multiply(&gens[b], &gens[a]).unwrap()));
            }
        }
    }
    out
}

/// Forward propagation of the (quasi-)distribution over distinct elements.
/// `x` is `ρ_imp` for one-point functions and `O′ρ_imp` for two-point functions.
#[allow(clippy::too_many_arguments)]
pub fn transfer_by_enumeration(
    gs: &ControlledGateSet,
    state: &ProductInitialState,
    x: &CMat,
    channel: &QuantumChannel,
    obs: &CMat,
    t: usize,
    cap: usize,
) -> Result<C64> {
    if t == 0 {
        return Ok(trace(&x.dot(obs)));
    }
    let kernel = Kernel::new(gs, state, channel);
    let mut store = ElementStore::new(gs.q(), ENUM_TOL);
    let mut weights: Vec<C64> = Vec::new();
    for (w, g) in first_step(gs, x, &state.psi_o) {
        let (i, new) = store.insert(g);
        if new {
            weights.push(ZERO);
        }
        weights[i] += w;
    }
    for step in 2..=t {
        let mut next = ElementStore::new(gs.q(), ENUM_TOL);
        let mut nw: Vec<C64> = Vec::new();
        for (g, &w) in store.elements().iter().zip(&weights) {
            let pb = kernel.pb(g);
            for (b, &p) in pb.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                for (a, &pa) in kernel.p_odd.iter().enumerate() {
                    if pa == 0.0 {
                        continue;
                    }
                    let (i, new) = next.insert(kernel.step(g, a, b));
                    if new {
                        nw.push(ZERO);
                        if next.len() > cap {
                            return Err(Error::ExplosionGuard { cap, t: step });
                        }
                    }
                    nw[i] += w * p * pa;
                }
            }
        }
        store = next;
        weights = nw;
    }
    Ok(store.elements().iter().zip(&weights).map(|(g, &w)| w * kernel.observable(g, obs)).sum())
}

fn form_coefficients(f: &QuadraticForm) -> Array1<C64> {
    let b0 = MonomialBasis::new(0);
    let b2 = MonomialBasis::new(2);
    f.multiplication_matrix(&b0, &b2).column(0).to_owned()
}

fn evaluate(coef: &Array1<C64>, basis: &MonomialBasis, x: &[f64; 4]) -> C64 {
    basis.evaluate(x).iter().zip(coef.iter()).map(|(e, c)| c * *e).sum()
}

/// Degree of the backward polynomial after `t` steps, and whether branch weights are constant.
fn poly_degree(channel: &QuantumChannel, state: &ProductInitialState, t: usize) -> (usize, Option<Vec<C64>>) {
    let forms = channel_diag_forms(&outer(&state.psi_e, &state.psi_e), channel);
    let scalars: Option<Vec<C64>> = forms.iter().map(|f| f.as_scalar(1e-13)).collect();
    match scalars {
        Some(s) => (2, Some(s)),
        None => (2 * t, None),
    }
}

/// Backward polynomial route (q = 2).
pub fn transfer_by_polynomials(
    gs: &ControlledGateSet,
    state: &ProductInitialState,
    x: &CMat,
    channel: &QuantumChannel,
    obs: &CMat,
    t: usize,
) -> Result<C64> {
    if gs.q() != 2 {
        return Err(Error::UnsupportedDimension(gs.q()));
    }
    if t == 0 {
        return Ok(trace(&x.dot(obs)));
    }
    let tau = outer(&state.psi_e, &state.psi_e);
    let (max_degree, scalars) = poly_degree(channel, state, t);
    if monomial_count(max_degree) > POLY_MAX_DIM {
        return Err(Error::TooLarge { needed: monomial_count(max_degree), cap: POLY_MAX_DIM });
    }
    let pb_forms = channel_diag_forms(&tau, channel);
    let gens: Vec<[f64; 4]> = generators(gs).iter().map(|g| g.quaternion().unwrap()).collect();
    let p_odd = odd_weights(&state.psi_o);
    // S(Q_ba) for every degree, with Q_ba q = q_b q q_a
    let mut towers = Vec::new();
    for b in 0..2 {
        for a in 0..2 {
            if p_odd[a] > 0.0 {
                towers.push((a, b, symmetric_powers(&sandwich_matrix(&gens[b], &gens[a]), max_degree)));
            }
        }
    }
    let mut degree = 2;
    let mut coef = form_coefficients(&observable_form(&tau, obs));
    for _ in 1..t {
        let from = MonomialBasis::new(degree);
        let next_degree = if scalars.is_some() { degree } else { degree + 2 };
        let to = MonomialBasis::new(next_degree);
        let mults: Vec<Option<ndarray::Array2<C64>>> = match &scalars {
            Some(_) => vec![None, None],
            None => pb_forms.iter().map(|f| Some(f.multiplication_matrix(&from, &to))).collect(),
        };
        let mut next = Array1::<C64>::zeros(to.dim());
        for (a, b, tower) in &towers {
            let s = &tower[degree];
            // F ∘ Q has coefficients Sᵀ c
            let sub: Array1<C64> = s.t().mapv(|v| c(v, 0.0)).dot(&coef);
            let w = p_odd[*a];
            match (&scalars, &mults[*b]) {
                (Some(sc), _) => next.scaled_add(sc[*b] * w, &sub),
                (None, Some(k)) => next.scaled_add(c(w, 0.0), &k.dot(&sub)),
                _ => unreachable!(),
            }
        }
        coef = next;
        degree = next_degree;
    }
    let basis = MonomialBasis::new(degree);
    Ok(first_step(gs, x, &state.psi_o)
        .iter()
        .map(|(w, g)| w * evaluate(&coef, &basis, &g.quaternion().unwrap()))
        .sum())
}

fn transfer_auto(
    gs: &ControlledGateSet,
    state: &ProductInitialState,
    x: &CMat,
    channel: &QuantumChannel,
    obs: &CMat,
    t: usize,
) -> Result<C64> {
    if gs.q() == 2 {
        let (deg, _) = poly_degree(channel, state, t);
        if monomial_count(deg) <= POLY_MAX_DIM {
            return transfer_by_polynomials(gs, state, x, channel, obs, t);
        }
    }
    transfer_by_enumeration(gs, state, x, channel, obs, t, DEFAULT_CAP)
}

/// Exact `⟨O(T)⟩` as the sum over all walk trajectories.
pub fn exact_observable_via_transfer(
    gs: &ControlledGateSet,
    state: &ProductInitialState,
    rho_imp: &CMat,
    channel: &QuantumChannel,
    obs: &ImpurityObservable,
    t: usize,
) -> Result<f64> {
    validate(gs, state, rho_imp, channel, &obs.matrix)?;
    Ok(transfer_auto(gs, state, rho_imp, channel, &obs.matrix, t)?.re)
}

/// Exact `⟨O(T) O′(0)⟩ = Tr[O Φ_T(O′ ρ_imp)]`.
pub fn exact_two_point_via_transfer(
    gs: &ControlledGateSet,
    state: &ProductInitialState,
    rho_imp: &CMat,
    channel: &QuantumChannel,
    o_prime: &CMat,
    obs: &ImpurityObservable,
    t: usize,
) -> Result<C64> {
    validate(gs, state, rho_imp, channel, &obs.matrix)?;
    transfer_auto(gs, state, &o_prime.dot(rho_imp), channel, &obs.matrix, t)
}

/// Exact sum over trajectories with every updated element replaced by its nearest grid point.
pub fn snapped_walk_observable(cfg: &WalkConfig, obs: &ImpurityObservable, grid: &CoveringGrid) -> Result<f64> {
    cfg.validate()?;
    if cfg.gs.q() != 2 {
        return Err(Error::UnsupportedDimension(cfg.gs.q()));
    }
    if cfg.t == 0 {
        return Ok(trace(&cfg.rho_imp.dot(&obs.matrix)).re);
    }
    let kernel = Kernel::new(&cfg.gs, &cfg.state, &cfg.channel);
    let mut dist: BTreeMap<usize, f64> = BTreeMap::new();
    for (w, g) in first_step(&cfg.gs, &cfg.rho_imp, &cfg.state.psi_o) {
        *dist.entry(grid.nearest_index(&g)).or_insert(0.0) += w.re;
    }
    for _ in 2..=cfg.t {
        let mut next: BTreeMap<usize, f64> = BTreeMap::new();
        for (&i, &w) in &dist {
            let g = &grid.points[i];
            let pb = kernel.pb(g);
            for (b, &p) in pb.iter().enumerate() {
                for (a, &pa) in kernel.p_odd.iter().enumerate() {
                    if p * pa == 0.0 {
                        continue;
                    }
                    *next.entry(grid.nearest_index(&kernel.step(g, a, b))).or_insert(0.0) += w * p * pa;
                }
            }
        }
        dist = next;
    }
    Ok(dist.iter().map(|(&i, &w)| w * kernel.observable(&grid.points[i], &obs.matrix).re).sum())
}
