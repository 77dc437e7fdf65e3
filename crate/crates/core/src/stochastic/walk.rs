//! The classical Markov chain on PU(q) and its Monte Carlo estimators.

use crate::error::{Error, Result};
use crate::gates::{ControlledGateSet, ImpurityObservable, ProductInitialState};
use crate::group_walk::element::{qmul, Quat};
use crate::group_walk::polynomial::{conjugation_forms, QuadraticForm};
use crate::group_walk::reachable::generators;
use crate::group_walk::{multiply, GroupElement};
use crate::linalg::*;
use crate::stochastic::channel::QuantumChannel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

#[derive(Clone, Debug)]
pub struct WalkConfig {
    pub gs: ControlledGateSet,
    pub state: ProductInitialState,
    pub rho_imp: CMat,
    pub channel: QuantumChannel,
    pub t: usize,
    pub n_samples: usize,
    pub seed: u64,
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        let q = self.gs.q();
        if self.state.q() != q || self.rho_imp.dim() != (q, q) || self.channel.q() != q {
            return Err(Error::DimensionMismatch("walk inputs disagree on q".into()));
        }
        density_check(&self.rho_imp, 1e-10).map_err(Error::NotADensityMatrix)?;
        let r = self.channel.tp_residual();
        if r > 1e-10 {
            return Err(Error::NonTracePreserving(r));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MCEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

/// One update branch `g ↦ g_b g g_a`: impurity value `b`, odd-site value `a`.
#[derive(Clone, Debug)]
pub struct Branch {
    pub a: usize,
    pub b: usize,
    pub prob: f64,
    pub target: GroupElement,
}

pub(crate) fn odd_weights(psi_o: &CVec) -> Vec<f64> {
    psi_o.iter().map(|z| z.norm_sqr()).collect()
}

/// `p(a, b) = ⟨b|ρ_imp|b⟩ |⟨a|ψ_o⟩|²` with target `g_b g_a`.
pub fn initial_prob(gs: &ControlledGateSet, rho_imp: &CMat, psi_o: &CVec) -> Result<Vec<Branch>> {
    density_check(rho_imp, 1e-10).map_err(Error::NotADensityMatrix)?;
    let e = GroupElement::identity(gs.q());
    branches(gs, &e, &rho_imp.diag().mapv(|z| z.re).to_vec(), psi_o)
}

/// `P(a, b) = ⟨b|𝒦[u(g)|ψ_e⟩⟨ψ_e|u(g)†]|b⟩ |⟨a|ψ_o⟩|²` with target `g_b g g_a`.
pub fn conditional_prob(
    gs: &ControlledGateSet,
    g: &GroupElement,
    channel: &QuantumChannel,
    psi_e: &CVec,
    psi_o: &CVec,
) -> Result<Vec<Branch>> {
    let r = channel.tp_residual();
    if r > 1e-10 {
        return Err(Error::NonTracePreserving(r));
    }
    let u = g.matrix();
    let rho = channel.apply(&u.dot(&outer(psi_e, psi_e)).dot(&dagger(&u)));
    branches(gs, g, &rho.diag().mapv(|z| z.re.max(0.0)).to_vec(), psi_o)
}

fn branches(gs: &ControlledGateSet, g: &GroupElement, pb: &[f64], psi_o: &CVec) -> Result<Vec<Branch>> {
    let gens = generators(gs);
    let pa = odd_weights(psi_o);
    let mut out = Vec::new();
    for (b, &wb) in pb.iter().enumerate() {
        for (a, &wa) in pa.iter().enumerate() {
            let target = multiply(&multiply(&gens[b], g)?, &gens[a])?;
            out.push(Branch { a, b, prob: wb * wa, target });
        }
    }
    Ok(out)
}

/// Per-step data of the walk, shared by the estimators and the exact references.
pub(crate) struct Kernel {
    pub gens: Vec<GroupElement>,
    pub tau: CMat,
    pub p_odd: Vec<f64>,
    pub channel: QuantumChannel,
    /// q = 2 only: quaternions of the generators and the quadratic forms of P_b.
    pub quat: Option<QuatKernel>,
}

pub(crate) struct QuatKernel {
    pub gens: Vec<Quat>,
    pub pb: Vec<QuadraticForm>,
}

/// Forms of `⟨b|𝒦[u(q) τ u(q)†]|b⟩`.
pub(crate) fn channel_diag_forms(tau: &CMat, channel: &QuantumChannel) -> Vec<QuadraticForm> {
    use crate::group_walk::polynomial::quaternion_units;
    let units = quaternion_units();
    let mut out = vec![QuadraticForm::default(), QuadraticForm::default()];
    for i in 0..4 {
        for j in 0..4 {
            let m = channel.apply(&units[i].dot(tau).dot(&dagger(&units[j])));
            for (b, f) in out.iter_mut().enumerate() {
                f.a[i][j] = m[[b, b]];
            }
        }
    }
    out
}

/// Form of `Tr[u(q) τ u(q)† O]`.
pub(crate) fn observable_form(tau: &CMat, obs: &CMat) -> QuadraticForm {
    let forms = conjugation_forms(tau);
    let mut f = QuadraticForm::default();
    for b in 0..2 {
        for bp in 0..2 {
            let o = obs[[bp, b]];
            for i in 0..4 {
                for j in 0..4 {
                    f.a[i][j] += o * forms[b][bp].a[i][j];
                }
            }
        }
    }
    f
}

impl Kernel {
    pub fn new(gs: &ControlledGateSet, state: &ProductInitialState, channel: &QuantumChannel) -> Self {
        let q = gs.q();
        let gens = generators(gs);
        let tau = outer(&state.psi_e, &state.psi_e);
        let quat = (q == 2).then(|| QuatKernel {
            gens: gens.iter().map(|g| g.quaternion().unwrap()).collect(),
            pb: channel_diag_forms(&tau, channel),
        });
        Self { gens, tau, p_odd: odd_weights(&state.psi_o), channel: channel.clone(), quat }
    }

    /// Impurity-value distribution after the channel, given the current element.
    pub fn pb(&self, g: &GroupElement) -> Vec<f64> {
        if let (Some(k), Some(x)) = (&self.quat, g.quaternion()) {
            return k.pb.iter().map(|f| f.evaluate(&x).re.max(0.0)).collect();
        }
        let u = g.matrix();
        let rho = self.channel.apply(&u.dot(&self.tau).dot(&dagger(&u)));
        rho.diag().iter().map(|z| z.re.max(0.0)).collect()
    }

    pub fn step(&self, g: &GroupElement, a: usize, b: usize) -> GroupElement {
        multiply(&multiply(&self.gens[b], g).unwrap(), &self.gens[a]).unwrap()
    }

    pub fn observable(&self, g: &GroupElement, obs: &CMat) -> C64 {
        let u = g.matrix();
        trace(&u.dot(&self.tau).dot(&dagger(&u)).dot(obs))
    }
}

fn pick(weights: &[f64], u: f64) -> usize {
    let total: f64 = weights.iter().sum();
    let mut acc = 0.0;
    let target = u * total;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if target < acc {
            return i;
        }
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(weights.len() - 1)
}

#[derive(Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    fn merge(a: Moments, b: Moments) -> Moments {
        if a.n == 0.0 {
            return b;
        }
        if b.n == 0.0 {
            return a;
        }
        let n = a.n + b.n;
        let d = b.mean - a.mean;
        Moments { n, mean: a.mean + d * b.n / n, m2: a.m2 + b.m2 + d * d * a.n * b.n / n }
    }

    fn estimate(&self) -> MCEstimate {
        let n = self.n as usize;
        let stderr = if n > 1 { (self.m2 / (self.n - 1.0)).max(0.0).sqrt() / self.n.sqrt() } else { 0.0 };
        MCEstimate { mean: self.mean, stderr, n }
    }
}

fn pairwise(mut v: Vec<Vec<Moments>>) -> Vec<Moments> {
    while v.len() > 1 {
        let mut next = Vec::with_capacity(v.len().div_ceil(2));
        let mut it = v.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(a.iter().zip(&b).map(|(x, y)| Moments::merge(*x, *y)).collect()),
                None => next.push(a),
            }
        }
        v = next;
    }
    v.pop().unwrap_or_default()
}

const CHUNK: usize = 1024;

/// Runs `n` trajectories whose first element is drawn from `init` (weights, targets)
/// and records the observable at every time 1..=t. Trajectory `i` uses the stream
/// `stream_base + i` of a ChaCha8 generator seeded with `seed`.
fn run_walk(
    kernel: &Kernel,
    init: &[(f64, GroupElement)],
    obs: &CMat,
    t: usize,
    n: usize,
    seed: u64,
    stream_base: u64,
) -> Vec<MCEstimate> {
    let init_w: Vec<f64> = init.iter().map(|(w, _)| *w).collect();
    let obs_form = kernel.quat.as_ref().map(|_| observable_form(&kernel.tau, obs));
    let chunks: Vec<Vec<Moments>> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|ci| {
            let mut acc = vec![Moments::default(); t];
            for i in ci * CHUNK..((ci + 1) * CHUNK).min(n) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(stream_base + i as u64);
                let start = &init[pick(&init_w, rng.random::<f64>())].1;
                match (&kernel.quat, &obs_form) {
                    (Some(k), Some(f)) => {
                        let mut x = start.quaternion().unwrap();
                        for (step, m) in acc.iter_mut().enumerate() {
                            if step > 0 {
                                let pb: Vec<f64> = k.pb.iter().map(|p| p.evaluate(&x).re.max(0.0)).collect();
                                let b = pick(&pb, rng.random::<f64>());
                                let a = pick(&kernel.p_odd, rng.random::<f64>());
                                x = qmul(&qmul(&k.gens[b], &x), &k.gens[a]);
                            }
                            m.push(f.evaluate(&x).re);
                        }
                    }
                    _ => {
                        let mut g = start.clone();
                        for (step, m) in acc.iter_mut().enumerate() {
                            if step > 0 {
                                let b = pick(&kernel.pb(&g), rng.random::<f64>());
                                let a = pick(&kernel.p_odd, rng.random::<f64>());
                                g = kernel.step(&g, a, b);
                            }
                            m.push(kernel.observable(&g, obs).re);
                        }
                    }
                }
            }
            acc
        })
        .collect();
    pairwise(chunks).iter().map(Moments::estimate).collect()
}

fn proportional_to_identity(m: &CMat) -> Option<f64> {
    let q = m.nrows();
    let c0 = m[[0, 0]];
    if c0.im != 0.0 {
        return None;
    }
    (max_abs_diff(m, &eye(q).mapv(|z| z * c0)) == 0.0).then_some(c0.re)
}

fn check_obs(cfg: &WalkConfig, obs: &ImpurityObservable) -> Result<()> {
    if obs.matrix.dim() != (cfg.gs.q(), cfg.gs.q()) {
        return Err(Error::DimensionMismatch("observable dimension".into()));
    }
    Ok(())
}

/// Estimates at every time 1..=T from the same trajectories; the last entry equals
/// `estimate_observable` for the same configuration.
pub fn estimate_observable_series(cfg: &WalkConfig, obs: &ImpurityObservable) -> Result<Vec<MCEstimate>> {
    cfg.validate()?;
    check_obs(cfg, obs)?;
    if let Some(c0) = proportional_to_identity(&obs.matrix) {
        return Ok(vec![MCEstimate { mean: c0, stderr: 0.0, n: cfg.n_samples }; cfg.t]);
    }
    let kernel = Kernel::new(&cfg.gs, &cfg.state, &cfg.channel);
    let init: Vec<(f64, GroupElement)> = initial_prob(&cfg.gs, &cfg.rho_imp, &cfg.state.psi_o)?
        .into_iter()
        .map(|br| (br.prob, br.target))
        .collect();
    Ok(run_walk(&kernel, &init, &obs.matrix, cfg.t, cfg.n_samples, cfg.seed, 0))
}

pub fn estimate_observable(cfg: &WalkConfig, obs: &ImpurityObservable) -> Result<MCEstimate> {
    if cfg.t == 0 {
        cfg.validate()?;
        check_obs(cfg, obs)?;
        let v = trace(&cfg.rho_imp.dot(&obs.matrix)).re;
        return Ok(MCEstimate { mean: v, stderr: 0.0, n: cfg.n_samples });
    }
    Ok(*estimate_observable_series(cfg, obs)?.last().unwrap())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoPointEstimate {
    pub re: MCEstimate,
    pub im: MCEstimate,
}

/// `⟨O(T) O′(0)⟩` from the sign-decomposed quasi-probability `⟨b|O′ρ_imp|b⟩ |⟨a|ψ_o⟩|²`.
///
/// Branches are split into classes by the sign of the real and imaginary parts; each
/// class is sampled from its normalized magnitudes with a share of `n_samples`
/// proportional to its total weight, and the classes are recombined with signs.
pub fn estimate_two_point(cfg: &WalkConfig, o_prime: &CMat, obs: &ImpurityObservable) -> Result<TwoPointEstimate> {
    cfg.validate()?;
    check_obs(cfg, obs)?;
    if cfg.t == 0 {
        return Err(Error::InvalidArgument("two-point functions need T >= 1".into()));
    }
    let q = cfg.gs.q();
    let x = o_prime.dot(&cfg.rho_imp);
    let gens = generators(&cfg.gs);
    let pa = odd_weights(&cfg.state.psi_o);
    // classes: Re > 0, Re < 0, Im > 0, Im < 0
    let mut classes: Vec<Vec<(f64, GroupElement)>> = vec![Vec::new(); 4];
    for b in 0..q {
        for (a, &wa) in pa.iter().enumerate() {
            let w = x[[b, b]] * wa;
            let target = multiply(&gens[b], &gens[a])?;
            for (k, v) in [(0, w.re), (1, -w.re), (2, w.im), (3, -w.im)] {
                if v > 0.0 {
                    classes[k].push((v, target.clone()));
                }
            }
        }
    }
    let totals: Vec<f64> = classes.iter().map(|c| c.iter().map(|(w, _)| w).sum()).collect();
    let grand: f64 = totals.iter().sum();
    if grand <= 0.0 {
        return Err(Error::AllZeroWeights);
    }
    let kernel = Kernel::new(&cfg.gs, &cfg.state, &cfg.channel);
    let mut parts = [(0.0, 0.0, 0usize); 4];
    for k in 0..4 {
        if totals[k] <= 0.0 {
            continue;
        }
        let n = ((cfg.n_samples as f64 * totals[k] / grand).round() as usize).max(2);
        let est = *run_walk(&kernel, &classes[k], &obs.matrix, cfg.t, n, cfg.seed, (k as u64) << 48)
            .last()
            .unwrap();
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        parts[k] = (sign * totals[k] * est.mean, (totals[k] * est.stderr).powi(2), n);
    }
    let combine = |i: usize, j: usize| MCEstimate {
        mean: parts[i].0 + parts[j].0,
        stderr: (parts[i].1 + parts[j].1).sqrt(),
        n: parts[i].2 + parts[j].2,
    };
    Ok(TwoPointEstimate { re: combine(0, 1), im: combine(2, 3) })
}
