//! Floquet operator with open boundaries and level-spacing-ratio statistics.

use crate::chain::Register;
use crate::error::{Error, Result};
use crate::gates::ControlledGateSet;
use crate::linalg::*;
use ndarray::ShapeBuilder;
use ndarray_linalg::EigVals;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

/// Largest chain length accepted by default.
/// Largest dense Floquet matrix (entries) regardless of the requested cap: 8 GiB of complex entries.
pub const MAX_DENSE_ENTRIES: usize = 1 << 29;
pub const DEFAULT_MAX_L: usize = 14;
/// Spacings below this are counted as degenerate.
pub const DEGENERATE_SPACING: f64 = 1e-12;
pub const HISTOGRAM_BINS: usize = 25;

/// `𝕌 = 𝕌_odd 𝕌_even` on L sites: the even layer acts on bonds (x, x+1) with x = 0, 2, …, L−2,
/// the odd layer on x = 1, 3, …, L−3. Site 0 is the most significant digit.
pub fn build_floquet_obc(gs: &ControlledGateSet, l: usize) -> Result<CMat> {
    build_floquet_obc_capped(gs, l, DEFAULT_MAX_L)
}

pub fn build_floquet_obc_capped(gs: &ControlledGateSet, l: usize, max_l: usize) -> Result<CMat> {
    if l % 2 == 1 || l < 2 {
        return Err(Error::OddL(l));
    }
    let q = gs.q();
    if l > max_l {
        return Err(Error::TooLarge { needed: q.pow(2 * l as u32), cap: q.pow(2 * max_l as u32) });
    }
    let n = q.checked_pow(l as u32).unwrap_or(usize::MAX);
    if n.saturating_mul(n) > MAX_DENSE_ENTRIES {
        return Err(Error::TooLarge { needed: n.saturating_mul(n), cap: MAX_DENSE_ENTRIES });
    }
    let reg = Register::new(q, l);
    let u = gs.two_qudit().clone();
    let bonds: Vec<usize> = (0..l - 1).step_by(2).chain((1..l.saturating_sub(2)).step_by(2)).collect();
    // column-major storage: column j is 𝕌|j⟩
    let mut m = CMat::zeros((n, n).f());
    m.as_slice_memory_order_mut()
        .expect("fresh array is contiguous")
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(j, col)| {
            col[j] = ONE;
            for &x in &bonds {
                reg.apply_two(col, x, x + 1, &u);
            }
        });
    Ok(m)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpacingMode {
    /// Spacings between consecutive sorted phases only.
    Linear,
    /// Adds the wrap-around spacing from the largest phase back to the smallest.
    Circular,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ratios {
    pub ratios: Vec<f64>,
    pub degenerate_spacings: usize,
    pub n_spacings: usize,
}

/// `r_n = min(s_n, s_{n+1}) / max(s_n, s_{n+1})` on sorted phases without the wrap spacing.
pub fn spacing_ratios(phases: &[f64]) -> Result<Vec<f64>> {
    Ok(spacing_ratios_with(phases, SpacingMode::Linear)?.ratios)
}

pub fn spacing_ratios_with(phases: &[f64], mode: SpacingMode) -> Result<Ratios> {
    if phases.len() < 3 {
        return Err(Error::TooFewLevels(phases.len()));
    }
    let mut p = phases.to_vec();
    p.sort_by(f64::total_cmp);
    let mut s: Vec<f64> = p.windows(2).map(|w| w[1] - w[0]).collect();
    if mode == SpacingMode::Circular {
        s.push(p[0] + 2.0 * PI - p[p.len() - 1]);
    }
    let pairs: Vec<(f64, f64)> = match mode {
        SpacingMode::Linear => s.windows(2).map(|w| (w[0], w[1])).collect(),
        SpacingMode::Circular => (0..s.len()).map(|i| (s[i], s[(i + 1) % s.len()])).collect(),
    };
    let ratios = pairs
        .iter()
        .map(|&(a, b)| {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            if hi < DEGENERATE_SPACING {
                0.0
            } else {
                (lo / hi).clamp(0.0, 1.0)
            }
        })
        .collect();
    let degenerate_spacings = s.iter().filter(|&&v| v < DEGENERATE_SPACING).count();
    Ok(Ratios { ratios, degenerate_spacings, n_spacings: s.len() })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ReferenceKind {
    Poisson,
    Coe,
}

fn simpson(f: impl Fn(f64) -> f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = 1.0 / n as f64;
    let mut acc = f(0.0) + f(1.0);
    for i in 1..n {
        acc += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

/// Reference density of the spacing ratio on [0, 1].
pub fn reference_distribution(kind: ReferenceKind) -> impl Fn(f64) -> f64 {
    let raw = move |r: f64| match kind {
        ReferenceKind::Poisson => 2.0 / (1.0 + r).powi(2),
        ReferenceKind::Coe => 27.0 / 4.0 * (r + r * r) / (1.0 + r + r * r).powf(2.5),
    };
    let z = simpson(raw, 20_000);
    move |r| raw(r) / z
}

/// Mean ratio of a reference density.
pub fn reference_mean(kind: ReferenceKind) -> f64 {
    let f = reference_distribution(kind);
    simpson(|r| r * f(r), 20_000)
}

#[derive(Clone, Debug, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub densities: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Equal-width histogram on [0, 1] normalized to unit integral.
pub fn histogram(values: &[f64], bins: usize) -> Histogram {
    let mut counts = vec![0usize; bins];
    for &v in values {
        let k = ((v * bins as f64) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let w = 1.0 / bins as f64;
    let n = values.len().max(1) as f64;
    Histogram {
        edges: (0..=bins).map(|k| k as f64 * w).collect(),
        densities: counts.iter().map(|&c| c as f64 / (n * w)).collect(),
        counts,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectrumResult {
    pub l: usize,
    /// Sorted eigenphases in (−π, π].
    pub phases: Vec<f64>,
    pub ratios: Vec<f64>,
    pub mean_ratio: f64,
    pub histogram: Histogram,
    pub degenerate_spacings: usize,
    pub degenerate_fraction: f64,
    /// Largest deviation of an eigenvalue modulus from one.
    pub unimodularity: f64,
}

pub fn eigenphases(u: &CMat) -> Result<(Vec<f64>, f64)> {
    let vals = u.eigvals()?;
    let dev = vals.iter().map(|z| (z.norm() - 1.0).abs()).fold(0.0, f64::max);
    let mut phases: Vec<f64> = vals
        .iter()
        .map(|z| {
            let a = z.arg();
            if a <= -PI {
                PI
            } else {
                a
            }
        })
        .collect();
    phases.sort_by(f64::total_cmp);
    Ok((phases, dev))
}

/// Ratio statistics of a list of eigenphases, wrap spacing included.
pub fn ratio_report(l: usize, phases: Vec<f64>, unimodularity: f64) -> Result<SpectrumResult> {
    let r = spacing_ratios_with(&phases, SpacingMode::Circular)?;
    let mean_ratio = r.ratios.iter().sum::<f64>() / r.ratios.len() as f64;
    Ok(SpectrumResult {
        l,
        histogram: histogram(&r.ratios, HISTOGRAM_BINS),
        mean_ratio,
        degenerate_spacings: r.degenerate_spacings,
        degenerate_fraction: r.degenerate_spacings as f64 / r.n_spacings as f64,
        ratios: r.ratios,
        phases,
        unimodularity,
    })
}

pub fn lss_report(gs: &ControlledGateSet, l: usize) -> Result<SpectrumResult> {
    lss_report_capped(gs, l, DEFAULT_MAX_L)
}

pub fn lss_report_capped(gs: &ControlledGateSet, l: usize, max_l: usize) -> Result<SpectrumResult> {
    let u = build_floquet_obc_capped(gs, l, max_l)?;
    let (phases, dev) = eigenphases(&u)?;
    ratio_report(l, phases, dev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_sites_is_the_gate() {
        let gs = model_c(PI / 3.0);
        let u = build_floquet_obc(&gs, 2).unwrap();
        assert!(max_abs_diff(&u, gs.two_qudit()) < 1e-15);
        assert!(matches!(build_floquet_obc(&gs, 5), Err(Error::OddL(5))));
        assert!(matches!(build_floquet_obc_capped(&gs, 8, 6), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn identity_controls_give_a_permutation() {
        let gs = make_gate_set(2, vec![eye(2), eye(2)]).unwrap();
        let u = build_floquet_obc(&gs, 4).unwrap();
        for row in u.rows() {
            assert_eq!(row.iter().filter(|z| z.norm() > 0.5).count(), 1);
            assert!(row.iter().all(|z| z.norm() < 1e-15 || (z - ONE).norm() < 1e-15));
        }
        let rep = lss_report(&gs, 8).unwrap();
        assert!(rep.degenerate_fraction > 0.9);
    }

    #[test]
    fn four_sites_by_kron() {
        let gs = model_c(0.4);
        let g = gs.two_qudit();
        let even = kron(g, g);
        let odd = kron(&kron(&eye(2), g), &eye(2));
        let want = odd.dot(&even);
        assert!(max_abs_diff(&build_floquet_obc(&gs, 4).unwrap(), &want) < 1e-14);
    }

    #[test]
    fn floquet_is_unitary() {
        let u = build_floquet_obc(&model_c(PI / 3.0), 6).unwrap();
        assert!(unitarity_residual(&u) <= 1e-10);
        let (_, dev) = eigenphases(&u).unwrap();
        assert!(dev <= 1e-9);
    }

    #[test]
    fn ratio_arithmetic() {
        let r = spacing_ratios(&[0.0, 0.1, 0.3]).unwrap();
        assert_eq!(r.len(), 1);
        assert!((r[0] - 0.5).abs() < 1e-12);
        let eq: Vec<f64> = (0..50).map(|k| -PI + 2.0 * PI * (k as f64 + 0.5) / 50.0).collect();
        for mode in [SpacingMode::Linear, SpacingMode::Circular] {
            let r = spacing_ratios_with(&eq, mode).unwrap();
            assert!(r.ratios.iter().all(|&x| (x - 1.0).abs() < 1e-9));
        }
        assert!(matches!(spacing_ratios(&[0.0, 1.0]), Err(Error::TooFewLevels(2))));
    }

    #[test]
    fn poisson_phases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let phases: Vec<f64> = (0..100_000).map(|_| rng.random_range(-PI..PI)).collect();
        let rep = ratio_report(0, phases, 0.0).unwrap();
        let want = 2.0 * std::f64::consts::LN_2 - 1.0;
        assert!((rep.mean_ratio - want).abs() < 0.005, "{}", rep.mean_ratio);
        let integral: f64 = rep.histogram.densities.iter().sum::<f64>() / HISTOGRAM_BINS as f64;
        assert!((integral - 1.0).abs() < 1e-8);
    }

    #[test]
    fn reference_densities() {
        for kind in [ReferenceKind::Poisson, ReferenceKind::Coe] {
            let f = reference_distribution(kind);
            assert!((simpson(&f, 20_000) - 1.0).abs() < 1e-10);
        }
        let mean_poisson = reference_mean(ReferenceKind::Poisson);
        assert!((mean_poisson - (2.0 * std::f64::consts::LN_2 - 1.0)).abs() < 1e-9);
        assert!((reference_mean(ReferenceKind::Coe) - 0.5359).abs() < 1e-3);
    }

    #[test]
    fn global_phase_rotation() {
        let u = build_floquet_obc(&model_c(PI / 3.0), 8).unwrap();
        let a = lss_report(&model_c(PI / 3.0), 8).unwrap();
        let (phases, dev) = eigenphases(&u.mapv(|z| z * C64::from_polar(1.0, 0.77))).unwrap();
        let b = ratio_report(8, phases, dev).unwrap();
        assert!((a.mean_ratio - b.mean_ratio).abs() <= 3.0 / 256.0);
    }
}
