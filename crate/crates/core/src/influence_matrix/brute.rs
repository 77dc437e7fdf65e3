//! Finite-chain oracle: the bath sites `x = −N..−1` and the impurity at `x = 0`
//! evolved by the full brickwork circuit.
//!
//! One time step applies the gates on pairs `(x, x+1)` with x even and x+1 ≤ −1,
//! then the pairs with x odd (the last one couples site −1 to the impurity), then the
//! channel on the impurity (except after the last step).

use crate::chain::{kron_vecs, Register};
use crate::error::{Error, Result};
use crate::gates::{ControlledGateSet, ImpurityObservable, ProductInitialState};
use crate::linalg::*;
use crate::stochastic::channel::QuantumChannel;

/// Initial state of the bath.
#[derive(Clone, Debug)]
pub enum BathState {
    Product(ProductInitialState),
    /// Two-site density matrix on (odd, even) pairs `(−2k−1, −2k)`; index `odd * q + even`.
    Paired(CMat),
}

impl BathState {
    pub fn q(&self) -> usize {
        match self {
            BathState::Product(s) => s.q(),
            BathState::Paired(r) => (r.nrows() as f64).sqrt().round() as usize,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Backend {
    Auto,
    Statevector,
    Density,
}

#[derive(Clone, Copy, Debug)]
pub struct BruteForceOptions {
    /// Additional bath sites beyond the light cone `2T` (must be even).
    pub extra_sites: usize,
    /// Largest number of complex amplitudes held in memory.
    pub max_amplitudes: usize,
    pub backend: Backend,
}

impl Default for BruteForceOptions {
    fn default() -> Self {
        Self { extra_sites: 0, max_amplitudes: 1 << 25, backend: Backend::Auto }
    }
}

/// Exact `⟨O(T)⟩` on the finite chain `L = 2T + 1`.
pub fn brute_force_observable(
    gs: &ControlledGateSet,
    state: &ProductInitialState,
    rho_imp: &CMat,
    channels: &[QuantumChannel],
    obs: &ImpurityObservable,
    t: usize,
) -> Result<f64> {
    density_check(rho_imp, 1e-10).map_err(Error::NotADensityMatrix)?;
    let v = simulate_chain(
        gs,
        &BathState::Product(state.clone()),
        rho_imp,
        channels,
        &obs.matrix,
        t,
        BruteForceOptions::default(),
    )?;
    Ok(v.re)
}

/// `Tr[O Φ(X)]` where `X` is the initial impurity operator (a density matrix, or
/// `O′ρ_imp` for two-point functions) and Φ the full dynamics up to time T.
pub fn simulate_chain(
    gs: &ControlledGateSet,
    bath: &BathState,
    x_imp: &CMat,
    channels: &[QuantumChannel],
    obs: &CMat,
    t: usize,
    opts: BruteForceOptions,
) -> Result<C64> {
    let q = gs.q();
    if bath.q() != q || x_imp.dim() != (q, q) || obs.dim() != (q, q) {
        return Err(Error::DimensionMismatch("chain inputs disagree on q".into()));
    }
    if channels.len() + 1 != t.max(1) {
        return Err(Error::DimensionMismatch(format!("{} channels for T = {t}", channels.len())));
    }
    for ch in channels {
        let r = ch.tp_residual();
        if r > 1e-8 {
            return Err(Error::NonTracePreserving(r));
        }
    }
    if t == 0 {
        return Ok(trace(&x_imp.dot(obs)));
    }
    if opts.extra_sites % 2 != 0 {
        return Err(Error::InvalidArgument("extra bath sites must be even".into()));
    }
    let n_bath = 2 * t + opts.extra_sites;
    let unitary_channels = channels.iter().all(|c| c.kraus.len() == 1);
    let backend = match opts.backend {
        Backend::Auto if unitary_channels && matches!(bath, BathState::Product(_)) => Backend::Statevector,
        Backend::Auto => Backend::Density,
        b => b,
    };
    if backend == Backend::Statevector && (!unitary_channels || !matches!(bath, BathState::Product(_))) {
        return Err(Error::InvalidArgument("statevector backend needs unitary channels and a product bath".into()));
    }
    match backend {
        Backend::Statevector => statevector(gs, bath, x_imp, channels, obs, t, n_bath, opts.max_amplitudes),
        _ => density(gs, bath, x_imp, channels, obs, t, n_bath, opts.max_amplitudes),
    }
}

/// Gate pairs of one step as slot indices (slot = x + N).
pub(crate) fn layers(n_bath: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    // x even, x+1 ≤ −1  → slots s even with s + 1 ≤ N − 1
    let mut s = 0;
    while s + 1 < n_bath {
        pairs.push((s, s + 1));
        s += 2;
    }
    // x odd, x ≤ −1
    let mut s = 1;
    while s < n_bath {
        pairs.push((s, s + 1));
        s += 2;
    }
    pairs
}

fn site_states(bath: &BathState, n_bath: usize) -> Vec<CMat> {
    // per-site density matrices for product baths; bath slot s is x = s − N
    match bath {
        BathState::Product(st) => (0..n_bath)
            .map(|s| if s % 2 == 0 { outer(&st.psi_e, &st.psi_e) } else { outer(&st.psi_o, &st.psi_o) })
            .collect(),
        BathState::Paired(_) => unreachable!(),
    }
}

#[allow(clippy::too_many_arguments)]
fn statevector(
    gs: &ControlledGateSet,
    bath: &BathState,
    x_imp: &CMat,
    channels: &[QuantumChannel],
    obs: &CMat,
    t: usize,
    n_bath: usize,
    cap: usize,
) -> Result<C64> {
    let q = gs.q();
    let BathState::Product(st) = bath else { unreachable!() };
    // purify X = Σ_k μ_k |l_k⟩⟨r_k| through an ancilla after the impurity:
    // ket = Σ_k μ_k |l_k⟩|k⟩, bra = Σ_k |r_k⟩|k⟩ gives Tr_anc |ket⟩⟨bra| = X
    let (u, s, vt) = {
        use ndarray_linalg::SVD;
        x_imp.svd(true, true)?
    };
    let (u, vt) = (u.unwrap(), vt.unwrap());
    let rank = s.iter().filter(|&&v| v > 1e-15 * s[0].max(1e-300)).count().max(1);
    let slots = n_bath + 1 + usize::from(rank > 1);
    let reg = Register::new(q, slots);
    let needed = 2 * reg.dim();
    if needed > cap {
        return Err(Error::TooLarge { needed, cap });
    }
    let mut bath_parts: Vec<CVec> = Vec::new();
    for sidx in 0..n_bath {
        bath_parts.push(if sidx % 2 == 0 { st.psi_e.clone() } else { st.psi_o.clone() });
    }
    let bath_vec = kron_vecs(&bath_parts);
    let imp_dim = if rank > 1 { q * q } else { q };
    let mut ket_imp = vec![ZERO; imp_dim];
    let mut bra_imp = vec![ZERO; imp_dim];
    for k in 0..rank {
        for i in 0..q {
            let idx = if rank > 1 { i * q + k } else { i };
            ket_imp[idx] += u[[i, k]] * s[k];
            bra_imp[idx] += vt[[k, i]].conj();
        }
    }
    let prod = |imp: &[C64]| -> Vec<C64> {
        let mut out = Vec::with_capacity(bath_vec.len() * imp.len());
        for a in &bath_vec {
            for b in imp {
                out.push(a * b);
            }
        }
        out
    };
    let mut ket = prod(&ket_imp);
    let mut bra = prod(&bra_imp);
    let imp = n_bath;
    let pairs = layers(n_bath);
    for step in 1..=t {
        for &(a, b) in &pairs {
            reg.apply_two(&mut ket, a, b, gs.two_qudit());
            reg.apply_two(&mut bra, a, b, gs.two_qudit());
        }
        if step < t {
            let k = &channels[step - 1].kraus[0];
            reg.apply_one(&mut ket, imp, k);
            reg.apply_one(&mut bra, imp, k);
        }
    }
    Ok(reg.expectation_one(&bra, &ket, imp, obs))
}

#[allow(clippy::too_many_arguments)]
fn density(
    gs: &ControlledGateSet,
    bath: &BathState,
    x_imp: &CMat,
    channels: &[QuantumChannel],
    obs: &CMat,
    t: usize,
    n_bath: usize,
    cap: usize,
) -> Result<C64> {
    let q = gs.q();
    let n = n_bath + 1;
    let reg = Register::new(q, 2 * n);
    let needed = reg.dim();
    if needed > cap {
        return Err(Error::TooLarge { needed, cap });
    }
    // blocks of consecutive sites, in site order
    let mut blocks: Vec<CMat> = Vec::new();
    match bath {
        BathState::Product(_) => blocks.extend(site_states(bath, n_bath)),
        BathState::Paired(pair) => {
            let (reduced_odd, reduced_even) = pair_marginals(pair, q);
            // slot 0 is the even site x = −N whose odd partner lies outside
            blocks.push(reduced_even);
            let mut s = 1;
            while s + 1 < n_bath {
                blocks.push(pair.clone());
                s += 2;
            }
            blocks.push(reduced_odd);
        }
    }
    blocks.push(x_imp.clone());
    let mut rho = eye(1);
    for b in &blocks {
        rho = kron(&rho, b);
    }
    debug_assert_eq!(rho.nrows(), q.pow(n as u32));
    let mut v: Vec<C64> = rho.iter().copied().collect();
    let pairs = layers(n_bath);
    let u = gs.two_qudit();
    let uc = u.mapv(|z| z.conj());
    let imp = n_bath;
    for step in 1..=t {
        for &(a, b) in &pairs {
            reg.apply_two(&mut v, a, b, u);
            reg.apply_two(&mut v, n + a, n + b, &uc);
        }
        if step < t {
            let sop = channels[step - 1].superoperator();
            reg.apply_two(&mut v, imp, n + imp, &sop);
        }
    }
    // Tr[O ρ_imp]
    let dim = q.pow(n as u32);
    let mut acc = ZERO;
    for rest in 0..dim / q {
        for b in 0..q {
            for bp in 0..q {
                let row = rest * q + b;
                let col = rest * q + bp;
                acc += obs[[bp, b]] * v[row * dim + col];
            }
        }
    }
    Ok(acc)
}

/// Reduced states of the odd and even members of a two-site density matrix.
pub fn pair_marginals(pair: &CMat, q: usize) -> (CMat, CMat) {
    let mut odd = CMat::zeros((q, q));
    let mut even = CMat::zeros((q, q));
    for o in 0..q {
        for op in 0..q {
            for e in 0..q {
                odd[[o, op]] += pair[[o * q + e, op * q + e]];
                even[[o, op]] += pair[[e * q + o, e * q + op]];
            }
        }
    }
    (odd, even)
}
