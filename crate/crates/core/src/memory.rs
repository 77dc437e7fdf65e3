//! Teleportable entanglement through the influence matrix for permutation-phase controls
//! and an MPS of controlled unitaries on the even sites.

use crate::chain::Register;
use crate::error::{Error, Result};
use crate::gates::{make_gate_set, ControlledGateSet};
use crate::group_walk::haar::sample_haar_unitary;
use crate::influence_matrix::brute::layers;
use crate::linalg::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

#[derive(Clone, Debug)]
pub struct TeleportFamily {
    pub q: usize,
    pub d: usize,
    /// Bond unitaries `w^a`, D×D.
    pub w: Vec<CMat>,
    pub alpha: CVec,
    /// Controlled unitaries `u_a = D_a P_a`.
    pub controls: Vec<CMat>,
}

fn is_permutation_phase(u: &CMat, tol: f64) -> bool {
    let n = u.nrows();
    let mut col_hits = vec![0; n];
    for row in u.rows() {
        let nz: Vec<usize> = (0..n).filter(|&j| row[j].norm() > tol).collect();
        if nz.len() != 1 || (row[nz[0]].norm() - 1.0).abs() > tol {
            return false;
        }
        col_hits[nz[0]] += 1;
    }
    col_hits.iter().all(|&h| h == 1)
}

impl TeleportFamily {
    pub fn new(w: Vec<CMat>, alpha: CVec, controls: Vec<CMat>) -> Result<Self> {
        let q = alpha.len();
        if w.len() != q || controls.len() != q {
            return Err(Error::DimensionMismatch("need one w and one control per value".into()));
        }
        let d = w[0].nrows();
        for (i, m) in w.iter().enumerate() {
            if m.dim() != (d, d) {
                return Err(Error::DimensionMismatch("bond unitaries differ in size".into()));
            }
            let r = unitarity_residual(m);
            if r > 1e-10 {
                return Err(Error::NonUnitary { index: i, residual: r });
            }
        }
        let n = vec_norm(&alpha);
        if (n - 1.0).abs() > 1e-10 {
            return Err(Error::NotNormalized(n));
        }
        for u in &controls {
            if u.dim() != (q, q) || !is_permutation_phase(u, 1e-10) {
                return Err(Error::InvalidArgument("controls must be phase times permutation matrices".into()));
            }
        }
        Ok(Self { q, d, w, alpha, controls })
    }

    /// Uniform amplitudes, D = q, the given bond unitaries, and seeded permutation-phase controls.
    pub fn benchmark(w: Vec<CMat>, seed: u64) -> Result<Self> {
        let q = w.len();
        let alpha = CVec::from_elem(q, c(1.0 / (q as f64).sqrt(), 0.0));
        Self::new(w, alpha, random_permutation_phases(q, seed))
    }

    pub fn gate_set(&self) -> Result<ControlledGateSet> {
        make_gate_set(self.q, self.controls.clone())
    }

    fn is_uniform(&self) -> bool {
        let u = 1.0 / (self.q as f64).sqrt();
        self.alpha.iter().all(|a| (a - c(u, 0.0)).norm() < 1e-12)
    }
}

/// `u_a = D_a P_a` with uniformly random phases and permutations.
pub fn random_permutation_phases(q: usize, seed: u64) -> Vec<CMat> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..q)
        .map(|_| {
            let mut perm: Vec<usize> = (0..q).collect();
            for i in (1..q).rev() {
                perm.swap(i, rng.random_range(0..=i));
            }
            let mut u = CMat::zeros((q, q));
            for (j, &i) in perm.iter().enumerate() {
                u[[i, j]] = C64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU));
            }
            u
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct BipartiteState {
    pub rho: CMat,
    pub dims: (usize, usize),
}

impl BipartiteState {
    pub fn new(rho: CMat, dims: (usize, usize)) -> Result<Self> {
        if rho.nrows() != dims.0 * dims.1 || rho.ncols() != rho.nrows() {
            return Err(Error::BadDims(dims.0, dims.1, rho.nrows()));
        }
        density_check(&rho, 1e-10).map_err(Error::NotADensityMatrix)?;
        Ok(Self { rho, dims })
    }
}

/// `ρ_eff = (1/q²) Σ_{a,a′} |a⟩⟨a′| ⊗ w^a (w^{a′})†` for uniform amplitudes and D = q.
pub fn effective_state(fam: &TeleportFamily) -> Result<BipartiteState> {
    if !fam.is_uniform() || fam.d != fam.q {
        return Err(Error::NonUniformAlpha);
    }
    effective_state_general(fam)
}

/// `Σ_{a,a′} α_a α*_{a′} |a⟩⟨a′| ⊗ w^a (w^{a′})† / D`, any amplitudes and bond dimension.
pub fn effective_state_general(fam: &TeleportFamily) -> Result<BipartiteState> {
    let (q, d) = (fam.q, fam.d);
    let mut rho = CMat::zeros((q * d, q * d));
    for a in 0..q {
        for ap in 0..q {
            let blk = fam.w[a].dot(&dagger(&fam.w[ap])).mapv(|z| z * fam.alpha[a] * fam.alpha[ap].conj() / d as f64);
            rho.slice_mut(ndarray::s![a * d..(a + 1) * d, ap * d..(ap + 1) * d]).assign(&blk);
        }
    }
    BipartiteState::new(rho, (q, d))
}

pub fn partial_transpose_a(state: &BipartiteState) -> CMat {
    let (da, db) = state.dims;
    CMat::from_shape_fn((da * db, da * db), |(r, col)| {
        let (a, b) = (r / db, r % db);
        let (ap, bp) = (col / db, col % db);
        state.rho[[ap * db + b, a * db + bp]]
    })
}

/// `(‖ρ^{T_A}‖₁ − 1) / 2`.
pub fn negativity(state: &BipartiteState) -> Result<f64> {
    let (da, db) = state.dims;
    if state.rho.nrows() != da * db {
        return Err(Error::BadDims(da, db, state.rho.nrows()));
    }
    let (ev, _) = eigh(&partial_transpose_a(state));
    let tr_norm: f64 = ev.iter().map(|v| v.abs()).sum();
    Ok((tr_norm - 1.0) / 2.0)
}

#[derive(Clone, Debug, Serialize)]
pub struct NegativityHistogram {
    pub q: usize,
    pub n_samples: usize,
    pub seed: u64,
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub samples: Vec<f64>,
    pub mean: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
    pub fraction_positive: f64,
}

/// Threshold above which a sampled negativity counts as positive.
pub const POSITIVE_NEGATIVITY: f64 = 1e-6;
const NEG_BINS: usize = 50;

/// Negativity of `ρ_eff` with Haar-random `w^a`; sample i draws from stream i of `seed`.
pub fn negativity_histogram(q: usize, n_samples: usize, seed: u64) -> Result<NegativityHistogram> {
    if !(2..=4).contains(&q) {
        return Err(Error::UnsupportedDimension(q));
    }
    if n_samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let controls = random_permutation_phases(q, seed);
    let samples: Vec<f64> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let w = (0..q).map(|_| sample_haar_unitary(q, &mut rng)).collect();
            let alpha = CVec::from_elem(q, c(1.0 / (q as f64).sqrt(), 0.0));
            let fam = TeleportFamily::new(w, alpha, controls.clone())?;
            negativity(&effective_state(&fam)?)
        })
        .collect::<Result<_>>()?;
    let hi = (q as f64 - 1.0) / 2.0;
    let mut counts = vec![0; NEG_BINS];
    for &s in &samples {
        let k = ((s.max(0.0) / hi * NEG_BINS as f64) as usize).min(NEG_BINS - 1);
        counts[k] += 1;
    }
    let mut sorted = samples.clone();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 { sorted[n / 2] } else { 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]) };
    Ok(NegativityHistogram {
        q,
        n_samples,
        seed,
        edges: (0..=NEG_BINS).map(|k| hi * k as f64 / NEG_BINS as f64).collect(),
        counts,
        mean: samples.iter().sum::<f64>() / n as f64,
        median,
        min: sorted[0],
        max: sorted[n - 1],
        fraction_positive: samples.iter().filter(|&&s| s > POSITIVE_NEGATIVITY).count() as f64 / n as f64,
        samples,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TeleportOutcome {
    /// Measured impurity values after steps 1..T−1.
    pub outcome: Vec<usize>,
    pub probability: f64,
    pub negativity: f64,
}

/// Amplitude cap of the oracle's state vector.
pub const ORACLE_MAX_AMPLITUDES: usize = 1 << 24;

/// Statevector simulation of the protocol on the light cone `x = −2T..0`.
///
/// A bond register B starts maximally entangled with a reference R. The even sites are
/// generated from x = −2T toward x = −2 by `|0⟩_x |β⟩_B ↦ Σ_a α_a |a⟩_x w^a |β⟩_B`, so R
/// closes the far end of the MPS with the steady state `I/D` and B is its open near end.
/// Odd sites and the impurity start in |0⟩. After steps 1..T−1 the impurity is measured in
/// the computational basis and reset to |0⟩. The returned negativity is that of the
/// normalized state of (impurity after step T, B).
pub fn teleport_oracle(fam: &TeleportFamily, t: usize) -> Result<Vec<TeleportOutcome>> {
    let q = fam.q;
    if fam.d != q {
        return Err(Error::InvalidArgument("the oracle stores the bond in a qudit, so D must equal q".into()));
    }
    if t == 0 {
        return Err(Error::InvalidArgument("the protocol needs T >= 1".into()));
    }
    let gs = fam.gate_set()?;
    let n_bath = 2 * t;
    // slots: R, x = −2T..−1, impurity, B
    let slots = n_bath + 3;
    let reg = Register::new(q, slots);
    let needed = reg.dim();
    if needed > ORACLE_MAX_AMPLITUDES {
        return Err(Error::TooLarge { needed, cap: ORACLE_MAX_AMPLITUDES });
    }
    let (r_slot, imp, b_slot) = (0, n_bath + 1, n_bath + 2);
    let mut psi = vec![ZERO; needed];
    for k in 0..q {
        psi[k * reg.stride(r_slot) + k * reg.stride(b_slot)] = c(1.0 / (q as f64).sqrt(), 0.0);
    }
    // generator on (site, B): |a, j⟩⟨0, k| α_a w^a_{jk}
    let mut gen = CMat::zeros((q * q, q * q));
    for a in 0..q {
        for j in 0..q {
            for k in 0..q {
                gen[[a * q + j, k]] = fam.alpha[a] * fam.w[a][[j, k]];
            }
        }
    }
    for s in (1..=n_bath).step_by(2) {
        reg.apply_two(&mut psi, s, b_slot, &gen);
    }
    let pairs: Vec<(usize, usize)> = layers(n_bath).into_iter().map(|(a, b)| (a + 1, b + 1)).collect();
    let u = gs.two_qudit();
    let evolve_step = |state: &mut Vec<C64>| {
        for &(a, b) in &pairs {
            reg.apply_two(state, a, b, u);
        }
    };
    let mut branches = vec![(Vec::new(), psi)];
    for _ in 1..t {
        let mut next = Vec::with_capacity(branches.len() * q);
        for (hist, mut state) in branches {
            evolve_step(&mut state);
            for m in 0..q {
                let mut kraus = CMat::zeros((q, q));
                kraus[[0, m]] = ONE;
                let mut s = state.clone();
                reg.apply_one(&mut s, imp, &kraus);
                let mut h = hist.clone();
                h.push(m);
                next.push((h, s));
            }
        }
        branches = next;
    }
    let mut out = Vec::with_capacity(branches.len());
    for (outcome, mut state) in branches {
        evolve_step(&mut state);
        // impurity and B are the last two slots
        let rest = needed / (q * q);
        let m = CMat::from_shape_vec((rest, q * q), state).expect("state length");
        let rho = m.t().dot(&m.mapv(|z| z.conj()));
        let p = trace(&rho).re;
        let negativity = if p > 1e-14 {
            negativity(&BipartiteState::new(rho.mapv(|z| z / p), (q, q))?)?
        } else {
            0.0
        };
        out.push(TeleportOutcome { outcome, probability: p, negativity });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn haar_ws(q: usize, seed: u64) -> Vec<CMat> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..q).map(|_| sample_haar_unitary(q, &mut rng)).collect()
    }

    fn bell_state() -> BipartiteState {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let v = CVec::from(vec![c(s, 0.0), ZERO, ZERO, c(s, 0.0)]);
        BipartiteState::new(outer(&v, &v), (2, 2)).unwrap()
    }

    #[test]
    fn negativity_references() {
        assert!((negativity(&bell_state()).unwrap() - 0.5).abs() < 1e-12);
        let mixed = BipartiteState::new(eye(4).mapv(|z| z * 0.25), (2, 2)).unwrap();
        assert!(negativity(&mixed).unwrap().abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ra = {
            let u = sample_haar_unitary(2, &mut rng);
            u.dot(&CMat::from_diag(&CVec::from(vec![c(0.7, 0.0), c(0.3, 0.0)]))).dot(&dagger(&u))
        };
        let rb = {
            let u = sample_haar_unitary(3, &mut rng);
            u.dot(&CMat::from_diag(&CVec::from(vec![c(0.5, 0.0), c(0.3, 0.0), c(0.2, 0.0)]))).dot(&dagger(&u))
        };
        let prod = BipartiteState::new(kron(&ra, &rb), (2, 3)).unwrap();
        assert!(negativity(&prod).unwrap().abs() < 1e-12);
        let bad = BipartiteState { rho: eye(4), dims: (2, 3) };
        assert!(matches!(negativity(&bad), Err(Error::BadDims(2, 3, 4))));
    }

    #[test]
    fn identity_bonds_are_separable() {
        let fam = TeleportFamily::benchmark(vec![eye(3); 3], 0).unwrap();
        let st = effective_state(&fam).unwrap();
        assert!(negativity(&st).unwrap().abs() < 1e-12);
    }

    #[test]
    fn qubit_family_has_no_negativity() {
        for seed in 0..50 {
            let fam = TeleportFamily::benchmark(haar_ws(2, seed), seed).unwrap();
            assert!(negativity(&effective_state(&fam).unwrap()).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn qutrit_family_is_entangled() {
        let fam = TeleportFamily::benchmark(haar_ws(3, 11), 11).unwrap();
        assert!(negativity(&effective_state(&fam).unwrap()).unwrap() > 1e-6);
    }

    #[test]
    fn non_uniform_alpha_flagged() {
        let alpha = CVec::from(vec![c(0.6, 0.0), c(0.8, 0.0)]);
        let fam = TeleportFamily::new(haar_ws(2, 3), alpha, random_permutation_phases(2, 3)).unwrap();
        assert!(matches!(effective_state(&fam), Err(Error::NonUniformAlpha)));
        assert!(effective_state_general(&fam).is_ok());
    }

    #[test]
    fn controls_must_be_permutation_phases() {
        let bad = vec![exp_pauli(0.3, &pauli_x()), eye(2)];
        let alpha = CVec::from_elem(2, c(std::f64::consts::FRAC_1_SQRT_2, 0.0));
        assert!(TeleportFamily::new(haar_ws(2, 0), alpha, bad).is_err());
    }

    #[test]
    fn histogram_is_reproducible() {
        let a = negativity_histogram(3, 200, 9).unwrap();
        let b = negativity_histogram(3, 200, 9).unwrap();
        assert_eq!(a.counts, b.counts);
        assert_eq!(a.counts.iter().sum::<usize>(), 200);
    }

    #[test]
    fn oracle_matches_effective_state() {
        for q in [2, 3] {
            let fam = TeleportFamily::benchmark(haar_ws(q, 5), 5).unwrap();
            let want = negativity(&effective_state(&fam).unwrap()).unwrap();
            for t in 1..=3 {
                let out = teleport_oracle(&fam, t).unwrap();
                assert_eq!(out.len(), q.pow(t as u32 - 1));
                let ptot: f64 = out.iter().map(|o| o.probability).sum();
                assert!((ptot - 1.0).abs() < 1e-10);
                for o in &out {
                    assert!((o.negativity - want).abs() < 1e-9, "q={q} T={t}: {} vs {want}", o.negativity);
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn negativity_local_unitary_invariance(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = CMat::from_shape_fn((6, 6), |_| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
            let rho = g.dot(&dagger(&g));
            let tr = trace(&rho);
            let st = BipartiteState::new(rho.mapv(|z| z / tr), (2, 3)).unwrap();
            let v = kron(&sample_haar_unitary(2, &mut rng), &sample_haar_unitary(3, &mut rng));
            let moved = BipartiteState::new(v.dot(&st.rho).dot(&dagger(&v)), (2, 3)).unwrap();
            prop_assert!((negativity(&st).unwrap() - negativity(&moved).unwrap()).abs() <= 1e-10);
        }
    }
}
