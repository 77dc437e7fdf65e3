//! δ-coverings of PU(2) from the Hopf parametrization, with nearest-point snapping.

use crate::error::{Error, Result};
use crate::group_walk::element::{quat_distance, quat_from_su2, GroupElement, Quat};
use crate::group_walk::reachable::ElementStore;
use crate::linalg::*;
use std::collections::HashMap;
use std::f64::consts::PI;

#[derive(Clone, Debug)]
pub struct CoveringGrid {
    pub delta: f64,
    pub points: Vec<GroupElement>,
    pub grid_dims: (usize, usize, usize),
    quats: Vec<Quat>,
    cell: f64,
    index: HashMap<[i64; 4], Vec<usize>>,
}

/// `(⌈π/(2r)⌉, ⌈2π/r⌉, ⌈2π/r⌉)` for Hopf-angle resolution `r`.
pub fn hopf_dims(r: f64) -> (usize, usize, usize) {
    let nt = (PI / (2.0 * r) - 1e-12).ceil() as usize;
    let np = (2.0 * PI / r - 1e-12).ceil() as usize;
    (nt.max(1), np.max(1), np.max(1))
}

/// `[[cos θ e^{iφ}, sin θ e^{iψ}], [−sin θ e^{−iψ}, cos θ e^{−iφ}]]`
pub fn hopf_element(theta: f64, phi: f64, psi: f64) -> Quat {
    let (ct, st) = (theta.cos(), theta.sin());
    let m = ndarray::arr2(&[
        [C64::from_polar(ct, phi), C64::from_polar(st, psi)],
        [-C64::from_polar(st, -psi), C64::from_polar(ct, -phi)],
    ]);
    quat_from_su2(&m)
}

/// Builds a grid whose SO(3) covering radius is at most `delta`.
///
/// The Hopf angles are half of the rotation angle, so the angular grid is laid out
/// at resolution δ/2; `grid_dims` reports the dimensions actually used.
pub fn build_covering(delta: f64) -> Result<CoveringGrid> {
    if !(delta > 0.0 && delta <= PI / 2.0 + 1e-15) {
        return Err(Error::DeltaOutOfRange(delta));
    }
    let dims = hopf_dims(delta / 2.0);
    let (nt, np, ns) = dims;
    let mut store = ElementStore::new(2, 1e-10);
    for i in 0..nt {
        let theta = (i as f64 + 0.5) * (PI / 2.0) / nt as f64;
        for j in 0..np {
            let phi = 2.0 * PI * j as f64 / np as f64;
            for k in 0..ns {
                let psi = 2.0 * PI * k as f64 / ns as f64;
                store.insert(GroupElement::from_quaternion(hopf_element(theta, phi, psi)));
            }
        }
    }
    Ok(CoveringGrid::with_dims(delta, store.into_elements(), dims))
}

impl CoveringGrid {
    /// A grid from explicit points (q = 2). `delta` is the nominal radius used for bounds.
    pub fn from_points(delta: f64, points: Vec<GroupElement>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("empty covering grid".into()));
        }
        if let Some(p) = points.iter().find(|p| p.q() != 2) {
            return Err(Error::UnsupportedDimension(p.q()));
        }
        Ok(Self::with_dims(delta, points, (0, 0, 0)))
    }

    fn with_dims(delta: f64, points: Vec<GroupElement>, grid_dims: (usize, usize, usize)) -> Self {
        let quats: Vec<Quat> = points.iter().map(|p| p.quaternion().expect("q = 2")).collect();
        let cell = (delta / 2.0).max(1e-6);
        let mut index: HashMap<[i64; 4], Vec<usize>> = HashMap::new();
        for (i, q) in quats.iter().enumerate() {
            index.entry(q.map(|v| (v / cell).floor() as i64)).or_default().push(i);
        }
        Self { delta, points, grid_dims, quats, cell, index }
    }

    /// Index of the nearest grid point; ties go to the lowest index.
    pub fn nearest_index(&self, g: &GroupElement) -> usize {
        let q = g.quaternion().expect("covering grids are q = 2");
        let mut best = (f64::INFINITY, usize::MAX);
        let consider = |i: usize, best: &mut (f64, usize)| {
            let d = quat_distance(&self.quats[i], &q);
            if d < best.0 || (d == best.0 && i < best.1) {
                *best = (d, i);
            }
        };
        for x in [q, q.map(|v| -v)] {
            let base = x.map(|v| (v / self.cell).floor() as i64);
            for code in 0..81usize {
                let mut key = base;
                let mut c = code;
                for k in key.iter_mut() {
                    *k += (c % 3) as i64 - 1;
                    c /= 3;
                }
                if let Some(ids) = self.index.get(&key) {
                    for &i in ids {
                        consider(i, &mut best);
                    }
                }
            }
        }
        // the neighbourhood search is exact whenever the nearest point lies within
        // chord distance δ/2; otherwise fall back to a scan
        let chord_reach = self.cell;
        if best.0.is_infinite() || 2.0 * (best.0 / 4.0).sin() > chord_reach {
            for i in 0..self.quats.len() {
                consider(i, &mut best);
            }
        }
        best.1
    }

    pub fn snap(&self, g: &GroupElement) -> GroupElement {
        self.points[self.nearest_index(g)].clone()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

pub fn snap(grid: &CoveringGrid, g: &GroupElement) -> GroupElement {
    grid.snap(g)
}
