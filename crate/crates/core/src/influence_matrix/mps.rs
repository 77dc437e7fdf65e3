//! Temporal MPS container, canonical sweeps, entanglement and contraction with a process.

use crate::error::{Error, Result};
use crate::gates::ImpurityObservable;
use crate::influence_matrix::exact::{phys, BondBasis, BondLabel};
use crate::linalg::*;
use crate::stochastic::channel::QuantumChannel;
use ndarray::{Array2, Array3, Axis};
use ndarray_linalg::{QR, SVD};

/// The IM vector `norm · Σ A_1[s_1] ⋯ A_T[s_T]`; outer bonds have dimension one.
#[derive(Clone, Debug)]
pub struct TemporalMPS {
    q: usize,
    pub tensors: Vec<Array3<C64>>,
    /// Labels of the internal cuts 1..T−1.
    pub bond_labels: Vec<BondLabel>,
    pub norm: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TEEProfile {
    /// Entropy (nats) at cuts 1..T−1.
    pub per_cut_entropy: Vec<f64>,
    pub max_entropy: f64,
    pub t: usize,
    /// `None` for an untruncated IM.
    pub chi_used: Option<usize>,
}

impl TemporalMPS {
    pub fn new(q: usize, tensors: Vec<Array3<C64>>, bond_labels: Vec<BondLabel>) -> Self {
        Self { q, tensors, bond_labels, norm: 1.0 }
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn t(&self) -> usize {
        self.tensors.len()
    }

    /// Bond dimensions at cuts 1..T−1.
    pub fn bond_dims(&self) -> Vec<usize> {
        self.tensors[..self.t() - 1].iter().map(|w| w.dim().2).collect()
    }

    /// Dense IM vector, leg 1 most significant. Small T only.
    pub fn to_dense(&self) -> CVec {
        let mut acc = Array2::<C64>::from_elem((1, 1), ONE);
        for w in &self.tensors {
            let (l, p, r) = w.dim();
            let m = w.to_shape((l, p * r)).unwrap();
            let next = acc.dot(&m);
            let rows = acc.nrows();
            acc = next.to_shape((rows * p, r)).unwrap().to_owned();
        }
        acc.column(0).mapv(|z| z * self.norm)
    }

    fn anonymize(&mut self) {
        let dims = self.bond_dims();
        self.bond_labels = dims
            .into_iter()
            .map(|d| BondLabel { basis: BondBasis::Anonymous(d), pending_odd: false })
            .collect();
    }

    /// Moves all weight into the first tensor, leaving the others right-orthonormal.
    /// Returns the 2-norm of the first tensor.
    fn right_canonicalize(&mut self) -> Result<f64> {
        for k in (1..self.t()).rev() {
            let (l, p, r) = self.tensors[k].dim();
            let m = self.tensors[k].to_shape((l, p * r)).unwrap().to_owned();
            // m = R† Q† from the QR of m†
            let (qm, rm) = dagger(&m).qr()?;
            let keep = qm.ncols();
            self.tensors[k] = dagger(&qm).to_shape((keep, p, r)).unwrap().to_owned();
            let carry = dagger(&rm); // l × keep
            self.tensors[k - 1] = contract_right(&self.tensors[k - 1], &carry);
        }
        let n = self.tensors[0].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        Ok(n)
    }

    /// Left-to-right SVD sweep on a right-canonical MPS with unit-norm first tensor.
    /// Returns the squared singular values at each cut, and keeps at most `chi` of them
    /// above `cutoff` (relative to the largest).
    fn svd_sweep(&mut self, chi: usize, cutoff: f64) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
        let mut spectra = Vec::new();
        let mut discarded = Vec::new();
        for k in 0..self.t() - 1 {
            let (l, p, r) = self.tensors[k].dim();
            let m = self.tensors[k].to_shape((l * p, r)).unwrap().to_owned();
            let (u, s, vt) = m.svd(true, true)?;
            let (u, vt) = (u.unwrap(), vt.unwrap());
            let total: f64 = s.iter().map(|v| v * v).sum();
            let smax = s.first().copied().unwrap_or(0.0);
            let keep = s.iter().take(chi).filter(|&&v| v > cutoff * smax && v > 0.0).count().max(1);
            let kept: f64 = s.iter().take(keep).map(|v| v * v).sum();
            discarded.push(if total > 0.0 { (total - kept) / total } else { 0.0 });
            spectra.push(s.iter().take(keep).map(|v| v * v / kept.max(f64::MIN_POSITIVE)).collect());
            self.tensors[k] = u.slice(ndarray::s![.., ..keep]).to_owned().to_shape((l, p, keep)).unwrap().to_owned();
            let mut carry = vt.slice(ndarray::s![..keep, ..]).to_owned();
            for (i, mut row) in carry.axis_iter_mut(Axis(0)).enumerate() {
                row.mapv_inplace(|z| z * s[i]);
            }
            self.tensors[k + 1] = contract_left(&carry, &self.tensors[k + 1]);
        }
        Ok((spectra, discarded))
    }

    /// `Tr[O Φ_T(X)]` for an arbitrary initial impurity operator X.
    pub fn contract_operator(&self, x_imp: &CMat, channels: &[QuantumChannel], obs: &CMat) -> Result<C64> {
        let q = self.q;
        let t = self.t();
        if channels.len() + 1 != t {
            return Err(Error::DimensionMismatch(format!("{} channels for T = {t}", channels.len())));
        }
        if x_imp.dim() != (q, q) || obs.dim() != (q, q) {
            return Err(Error::DimensionMismatch("impurity operator dimension".into()));
        }
        for ch in channels {
            let r = ch.tp_residual();
            if r > 1e-8 {
                return Err(Error::NonTracePreserving(r));
            }
        }
        // env[l, (a, a′)]
        let mut env = Array2::<C64>::zeros((1, q * q));
        for a in 0..q {
            for ap in 0..q {
                env[[0, a * q + ap]] = x_imp[[a, ap]];
            }
        }
        for (k, w) in self.tensors.iter().enumerate() {
            let (l, _, r) = w.dim();
            let mut next = Array2::<C64>::zeros((r, q * q));
            for li in 0..l {
                for a in 0..q {
                    for ap in 0..q {
                        let e = env[[li, a * q + ap]];
                        if e == ZERO {
                            continue;
                        }
                        for b in 0..q {
                            for bp in 0..q {
                                let col = w.slice(ndarray::s![li, phys(q, a, ap, b, bp), ..]);
                                next.column_mut(b * q + bp).scaled_add(e, &col);
                            }
                        }
                    }
                }
            }
            if k + 1 < t {
                let sop = channels[k].superoperator();
                next = next.dot(&sop.t());
            }
            env = next;
        }
        let mut acc = ZERO;
        for b in 0..q {
            for bp in 0..q {
                acc += env[[0, b * q + bp]] * obs[[bp, b]];
            }
        }
        Ok(acc * self.norm)
    }
}

fn contract_right(w: &Array3<C64>, m: &CMat) -> Array3<C64> {
    let (l, p, r) = w.dim();
    let flat = w.to_shape((l * p, r)).unwrap().dot(m);
    let nr = m.ncols();
    flat.to_shape((l, p, nr)).unwrap().to_owned()
}

fn contract_left(m: &CMat, w: &Array3<C64>) -> Array3<C64> {
    let (l, p, r) = w.dim();
    let flat = m.dot(&w.to_shape((l, p * r)).unwrap());
    let nl = m.nrows();
    flat.to_shape((nl, p, r)).unwrap().to_owned()
}

fn entropy(spectrum: &[f64]) -> f64 {
    spectrum.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum::<f64>().max(0.0)
}

/// Entanglement entropy of the normalized IM at every internal cut.
pub fn temporal_entanglement(mps: &TemporalMPS) -> Result<TEEProfile> {
    let t = mps.t();
    if t < 2 {
        return Err(Error::InvalidArgument("temporal entanglement needs T >= 2".into()));
    }
    let mut m = mps.clone();
    let n = m.right_canonicalize()? * mps.norm.abs();
    if !(n >= 1e-14) || !n.is_finite() {
        return Err(Error::DegenerateNorm(n));
    }
    let n0 = n / mps.norm.abs();
    m.tensors[0].mapv_inplace(|z| z / n0);
    let (spectra, _) = m.svd_sweep(usize::MAX, 1e-14)?;
    let per_cut_entropy: Vec<f64> = spectra.iter().map(|s| entropy(s)).collect();
    let max_entropy = per_cut_entropy.iter().copied().fold(0.0, f64::max);
    let chi_used = mps.bond_labels.iter().any(|b| matches!(b.basis, BondBasis::Anonymous(_))).then(|| {
        mps.bond_dims().into_iter().max().unwrap_or(1)
    });
    Ok(TEEProfile { per_cut_entropy, max_entropy, t, chi_used })
}

/// Result of [`compress`].
#[derive(Clone, Debug)]
pub struct Compressed {
    pub mps: TemporalMPS,
    /// Discarded weight (fraction of the squared norm) at cuts 1..T−1.
    pub discarded: Vec<f64>,
}

/// Canonical SVD truncation keeping at most `chi_max` singular values above
/// `cutoff · s_max` at every cut. The vector norm is carried in `norm`.
pub fn compress(mps: &TemporalMPS, chi_max: usize, cutoff: f64) -> Result<Compressed> {
    if chi_max == 0 {
        return Err(Error::InvalidArgument("chi_max must be at least 1".into()));
    }
    let mut m = mps.clone();
    if m.t() == 1 {
        return Ok(Compressed { mps: m, discarded: vec![] });
    }
    let n = m.right_canonicalize()?;
    if n == 0.0 {
        return Err(Error::DegenerateNorm(0.0));
    }
    m.tensors[0].mapv_inplace(|z| z / n);
    m.norm *= n;
    let (_, discarded) = m.svd_sweep(chi_max, cutoff)?;
    m.anonymize();
    Ok(Compressed { mps: m, discarded })
}

/// `⟨O(T)⟩` with the impurity starting in `rho_imp` and `channels[k]` applied after step k+1.
pub fn contract_with_process(
    mps: &TemporalMPS,
    rho_imp: &CMat,
    channels: &[QuantumChannel],
    obs: &ImpurityObservable,
) -> Result<f64> {
    density_check(rho_imp, 1e-10).map_err(Error::NotADensityMatrix)?;
    let v = mps.contract_operator(rho_imp, channels, &obs.matrix)?;
    Ok(v.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates::*;
    use crate::influence_matrix::brute::{brute_force_observable, simulate_chain, BathState};
    use crate::influence_matrix::exact::{build_exact_im, build_im, BondStrategy};
    use crate::stochastic::channel::{mixed_channel, named_state};
    use std::f64::consts::{LN_2, PI};

    fn channel_ii() -> QuantumChannel {
        QuantumChannel::causal_break(&named_state(2, "+").unwrap()).unwrap()
    }

    #[test]
    fn trace_preservation() {
        for gs in [model_a(LN_2), model_b(LN_2), model_c(PI / 3.0)] {
            for t in 1..=6 {
                let mps = build_im(&gs, &BathState::Product(ProductInitialState::plus(2)), t, BondStrategy::Compact)
                    .unwrap();
                let chans = vec![QuantumChannel::identity(2); t - 1];
                let v = contract_with_process(&mps, &eye(2).mapv(|z| z * 0.5), &chans, &ImpurityObservable::identity(2))
                    .unwrap();
                assert!((v - 1.0).abs() < 1e-8, "T={t}: {v}");
            }
        }
    }

    #[test]
    fn contraction_matches_chain() {
        let rho = named_state(2, "+").unwrap();
        let st = ProductInitialState::plus(2);
        for gs in [model_a(LN_2), model_b(LN_2), model_c(PI / 3.0)] {
            for ch in [QuantumChannel::identity(2), channel_ii(), mixed_channel(0.4, &rho).unwrap()] {
                for t in 1..=4 {
                    let chans = vec![ch.clone(); t - 1];
                    let obs = ImpurityObservable::sigma_x();
                    let b = brute_force_observable(&gs, &st, &rho, &chans, &obs, t).unwrap();
                    let exact = build_exact_im(&gs, &st, t).unwrap();
                    let compact = build_im(&gs, &BathState::Product(st.clone()), t, BondStrategy::Compact).unwrap();
                    for mps in [&exact, &compact] {
                        let v = contract_with_process(mps, &rho, &chans, &obs).unwrap();
                        assert!((v - b).abs() < 1e-10, "T={t} {}: {v} vs {b}", ch.label);
                    }
                }
            }
        }
    }

    #[test]
    fn compact_and_exact_vectors_agree() {
        let st = ProductInitialState::plus(2);
        for gs in [model_b(LN_2), model_c(PI / 3.0)] {
            let e = build_exact_im(&gs, &st, 3).unwrap().to_dense();
            let c = build_im(&gs, &BathState::Product(st.clone()), 3, BondStrategy::Compact).unwrap().to_dense();
            let d: f64 = (&e - &c).iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(d < 1e-12, "{d}");
        }
    }

    #[test]
    fn paired_bath_matches_chain() {
        let gs = model_c(PI / 3.0);
        let v = CVec::from(vec![c(0.6, 0.0), c(0.0, 0.3), c(0.5, 0.2), c(-0.1, 0.0)]);
        let nv = vec_norm(&v);
        let pair = outer(&v, &v).mapv(|z| z / (nv * nv));
        let rho = named_state(2, "+i").unwrap();
        let ch = mixed_channel(0.3, &named_state(2, "0").unwrap()).unwrap();
        for t in 1..=4 {
            let chans = vec![ch.clone(); t - 1];
            let b = simulate_chain(&gs, &BathState::Paired(pair.clone()), &rho, &chans, &pauli_y(), t, Default::default())
                .unwrap();
            for strategy in [BondStrategy::Elements, BondStrategy::Compact] {
                let mps = build_im(&gs, &BathState::Paired(pair.clone()), t, strategy).unwrap();
                let v = mps.contract_operator(&rho, &chans, &pauli_y()).unwrap();
                assert!((v - b).norm() < 1e-10, "T={t}: {v} vs {b}");
            }
        }
    }

    #[test]
    fn two_point_contraction() {
        let gs = model_a(LN_2);
        let st = ProductInitialState::plus(2);
        let rho = named_state(2, "+").unwrap();
        let x = pauli_z().dot(&rho);
        let mps = build_exact_im(&gs, &st, 3).unwrap();
        let chans = vec![QuantumChannel::identity(2); 2];
        let b = simulate_chain(&gs, &BathState::Product(st), &x, &chans, &pauli_x(), 3, Default::default()).unwrap();
        assert!((mps.contract_operator(&x, &chans, &pauli_x()).unwrap() - b).norm() < 1e-12);
    }

    fn dense_entropy(v: &CVec, left_legs: usize, p: usize) -> f64 {
        let rows = p.pow(left_legs as u32);
        let m = v.to_shape((rows, v.len() / rows)).unwrap().to_owned();
        let n = vec_norm(v);
        let rho = m.dot(&dagger(&m)).mapv(|z| z / (n * n));
        let (ev, _) = eigh(&rho);
        ev.iter().filter(|&&x| x > 1e-300).map(|&x| -x * x.ln()).sum()
    }

    #[test]
    fn entropy_matches_dense_schmidt() {
        for gs in [model_a(LN_2), model_b(LN_2), model_c(PI / 3.0)] {
            let st = ProductInitialState::plus(2);
            let mps = build_exact_im(&gs, &st, 2).unwrap();
            let tee = temporal_entanglement(&mps).unwrap();
            let dense = dense_entropy(&mps.to_dense(), 1, 16);
            assert!((tee.per_cut_entropy[0] - dense).abs() < 1e-10);
            let mps = build_exact_im(&gs, &st, 3).unwrap();
            let tee = temporal_entanglement(&mps).unwrap();
            let v = mps.to_dense();
            for cut in 1..3 {
                assert!((tee.per_cut_entropy[cut - 1] - dense_entropy(&v, cut, 16)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn product_im_has_no_entanglement() {
        let mps = build_exact_im(&model_a(0.5), &ProductInitialState::plus(2), 5).unwrap();
        let tee = temporal_entanglement(&mps).unwrap();
        assert!(tee.max_entropy < 1e-10);
    }

    #[test]
    fn tee_bounded_by_bond() {
        let mps = build_exact_im(&model_b(LN_2), &ProductInitialState::plus(2), 8).unwrap();
        let tee = temporal_entanglement(&mps).unwrap();
        for (k, s) in tee.per_cut_entropy.iter().enumerate() {
            assert!(*s >= 0.0 && *s <= ((4 * (k + 1)) as f64).ln() + 1e-12);
        }
    }

    #[test]
    fn compress_without_truncation_is_identity() {
        let mps = build_exact_im(&model_c(PI / 3.0), &ProductInitialState::plus(2), 3).unwrap();
        let out = compress(&mps, 10_000, 0.0).unwrap();
        let d = (&mps.to_dense() - &out.mps.to_dense()).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!(d < 1e-10);
        assert!(out.discarded.iter().all(|&w| w < 1e-20));
    }

    #[test]
    fn discarded_weight_monotone_in_chi() {
        let mps = build_im(
            &model_c(PI / 3.0),
            &BathState::Product(ProductInitialState::plus(2)),
            6,
            BondStrategy::Compact,
        )
        .unwrap();
        let mut prev: Option<Vec<f64>> = None;
        for chi in [2, 4, 8, 16, 64] {
            let d = compress(&mps, chi, 0.0).unwrap().discarded;
            if let Some(p) = &prev {
                // the first cut sees identical input, later cuts inherit earlier truncations
                assert!(d[0] <= p[0] + 1e-15);
            }
            prev = Some(d);
        }
    }
}
