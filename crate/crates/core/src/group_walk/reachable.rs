//! Enumeration of `H(T) = H(T−1) · S̃` with `S̃ = {e} ∪ {g_a g_b}` and growth classification.

use crate::error::{Error, Result};
use crate::gates::ControlledGateSet;
use crate::group_walk::element::{multiply, project_to_group, GroupElement};
use std::collections::HashMap;

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_CAP: usize = 5_000_000;

/// Tolerance-aware set of group elements, kept in insertion order.
///
/// Keys quantize the first four real coordinates of the representative. Lookups probe
/// the 16 cells obtained by leaning toward the nearer neighbour in each coordinate,
/// for every projectively equivalent representative, and confirm by exact distance.
#[derive(Clone, Debug)]
pub struct ElementStore {
    tol: f64,
    cell: f64,
    buckets: HashMap<[i64; 4], Vec<usize>>,
    elements: Vec<GroupElement>,
}

fn coords(g: &GroupElement) -> Vec<[f64; 4]> {
    match g.quaternion() {
        Some(q) => vec![q, q.map(|v| -v)],
        None => {
            let m = g.matrix();
            let n = m.nrows();
            (0..n)
                .map(|k| {
                    let w = num_complex::Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / n as f64);
                    let a = m[[0, 0]] * w;
                    let b = m[[0, 1]] * w;
                    [a.re, a.im, b.re, b.im]
                })
                .collect()
        }
    }
}

impl ElementStore {
    pub fn new(q: usize, tol: f64) -> Self {
        // quaternion components move by at most tol/2 for SO(3) angle tol; matrix
        // entries by at most tol, so their cells are twice as wide
        let cell = if q == 2 { tol } else { 2.0 * tol };
        Self { tol, cell, buckets: HashMap::new(), elements: Vec::new() }
    }

    fn key(&self, x: &[f64; 4]) -> [i64; 4] {
        x.map(|v| (v / self.cell).floor() as i64)
    }

    pub fn find(&self, g: &GroupElement) -> Option<usize> {
        for x in coords(g) {
            let base = self.key(&x);
            let lean: Vec<i64> =
                (0..4).map(|k| if x[k] / self.cell - base[k] as f64 >= 0.5 { 1 } else { -1 }).collect();
            for mask in 0..16u32 {
                let mut key = base;
                for k in 0..4 {
                    if mask & (1 << k) != 0 {
                        key[k] += lean[k];
                    }
                }
                if let Some(ids) = self.buckets.get(&key) {
                    for &i in ids {
                        if self.elements[i].is_close(g, self.tol) {
                            return Some(i);
                        }
                    }
                }
            }
        }
        None
    }

    /// Returns the index of `g` (existing or new) and whether it was inserted.
    pub fn insert(&mut self, g: GroupElement) -> (usize, bool) {
        if let Some(i) = self.find(&g) {
            return (i, false);
        }
        let key = self.key(&coords(&g)[0]);
        let i = self.elements.len();
        self.elements.push(g);
        self.buckets.entry(key).or_default().push(i);
        (i, true)
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[GroupElement] {
        &self.elements
    }

    pub fn get(&self, i: usize) -> &GroupElement {
        &self.elements[i]
    }

    pub fn into_elements(self) -> Vec<GroupElement> {
        self.elements
    }
}

/// Projective images `g_a` of the controlled unitaries.
pub fn generators(gs: &ControlledGateSet) -> Vec<GroupElement> {
    gs.controlled().iter().map(|u| project_to_group(u).expect("validated gate set")).collect()
}

/// Time-indexed reachable sets. `H(T)` is the prefix of `elements` of length `counts[T]`.
#[derive(Clone, Debug)]
pub struct ReachableSet {
    elements: Vec<GroupElement>,
    pub counts: Vec<usize>,
    pub generators: Vec<GroupElement>,
    pub dedup_tol: f64,
}

impl ReachableSet {
    pub fn per_time(&self, t: usize) -> &[GroupElement] {
        &self.elements[..self.counts[t]]
    }

    pub fn t_max(&self) -> usize {
        self.counts.len() - 1
    }
}

pub fn reachable_set(gs: &ControlledGateSet, t_max: usize, tol: f64) -> Result<ReachableSet> {
    reachable_set_capped(gs, t_max, tol, DEFAULT_CAP)
}

pub fn reachable_set_capped(gs: &ControlledGateSet, t_max: usize, tol: f64, cap: usize) -> Result<ReachableSet> {
    if !(1e-12..=1e-6).contains(&tol) {
        return Err(Error::InvalidArgument(format!("dedup tolerance {tol} outside [1e-12, 1e-6]")));
    }
    let q = gs.q();
    let gens = generators(gs);
    let mut pairs = ElementStore::new(q, tol);
    pairs.insert(GroupElement::identity(q));
    for ga in &gens {
        for gb in &gens {
            pairs.insert(multiply(ga, gb)?);
        }
    }
    let step = pairs.into_elements();

    let mut store = ElementStore::new(q, tol);
    store.insert(GroupElement::identity(q));
    let mut counts = vec![1];
    let mut frontier = 0..1;
    for t in 1..=t_max {
        let start = store.len();
        for h in frontier.clone() {
            let hh = store.get(h).clone();
            for s in &step {
                store.insert(multiply(&hh, s)?);
                if store.len() > cap {
                    return Err(Error::ExplosionGuard { cap, t });
                }
            }
        }
        counts.push(store.len());
        frontier = start..store.len();
    }
    Ok(ReachableSet { elements: store.into_elements(), counts, generators: gens, dedup_tol: tol })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GrowthClass {
    Saturation,
    Polynomial,
    Exponential,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GrowthVerdict {
    pub class_label: GrowthClass,
    /// Degree for polynomial growth, rate for exponential growth.
    pub fit_exponent: Option<f64>,
    pub evidence_window: (usize, usize),
    pub residual: f64,
    pub loglog_residual: f64,
    pub semilog_residual: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct GrowthFitOptions {
    pub min_points: usize,
    /// Trailing fraction of the window that must be constant for saturation.
    pub saturation_fraction: f64,
    /// Trailing fraction of the window used for the growth fits.
    pub fit_fraction: f64,
}

impl Default for GrowthFitOptions {
    fn default() -> Self {
        Self { min_points: 8, saturation_fraction: 1.0 / 3.0, fit_fraction: 0.5 }
    }
}

/// Least squares `y = a + b x`; returns (b, rms residual).
fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let rss: f64 = x.iter().zip(y).map(|(xi, yi)| (yi - a - b * xi).powi(2)).sum();
    (b, (rss / n).sqrt())
}

pub fn classify_growth(rs: &ReachableSet) -> Result<GrowthVerdict> {
    classify_counts(&rs.counts, GrowthFitOptions::default())
}

/// Classifies a count sequence indexed by T = 0, 1, ....
pub fn classify_counts(counts: &[usize], opts: GrowthFitOptions) -> Result<GrowthVerdict> {
    let n = counts.len();
    let needed = opts.min_points.max(4);
    if n < needed {
        return Err(Error::InsufficientData { needed, got: n });
    }
    let t_max = n - 1;
    let sat_len = ((n as f64 * opts.saturation_fraction).ceil() as usize).max(2);
    let tail = &counts[n - sat_len..];
    if tail.iter().all(|&c| c == tail[0]) {
        return Ok(GrowthVerdict {
            class_label: GrowthClass::Saturation,
            fit_exponent: None,
            evidence_window: (n - sat_len, t_max),
            residual: 0.0,
            loglog_residual: 0.0,
            semilog_residual: 0.0,
        });
    }
    let fit_len = ((n as f64 * opts.fit_fraction).ceil() as usize).max(3).min(t_max);
    let t0 = n - fit_len;
    let ts: Vec<f64> = (t0..n).map(|t| t as f64).collect();
    let logt: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let logc: Vec<f64> = counts[t0..].iter().map(|&c| (c as f64).ln()).collect();
    let (deg, res_ll) = linear_fit(&logt, &logc);
    let (rate, res_sl) = linear_fit(&ts, &logc);
    let (class_label, fit_exponent, residual) = if res_ll <= res_sl {
        (GrowthClass::Polynomial, deg, res_ll)
    } else {
        (GrowthClass::Exponential, rate, res_sl)
    };
    Ok(GrowthVerdict {
        class_label,
        fit_exponent: Some(fit_exponent),
        evidence_window: (t0, t_max),
        residual,
        loglog_residual: res_ll,
        semilog_residual: res_sl,
    })
}
