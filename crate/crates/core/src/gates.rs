//! Controlled-SWAP gate sets `U = S (Σ_a u_a ⊗ |a⟩⟨a|)`, named models and initial-state data.

use crate::error::{Error, Result};
use crate::linalg::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// The q controlled unitaries `u_a` together with the derived two-qudit gate.
///
/// Two-qudit indices are `left * q + right`, and `U |a⟩⊗|b⟩ = |b⟩ ⊗ u_b|a⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlledGateSet {
    q: usize,
    controlled: Vec<CMat>,
    two_qudit: CMat,
}

const UNITARITY_TOL: f64 = 1e-8;

impl ControlledGateSet {
    pub fn new(q: usize, unitaries: Vec<CMat>) -> Result<Self> {
        if q < 2 {
            return Err(Error::DimensionMismatch(format!("q must be at least 2, got {q}")));
        }
        if unitaries.len() != q {
            return Err(Error::DimensionMismatch(format!(
                "expected {q} controlled unitaries, got {}",
                unitaries.len()
            )));
        }
        for (index, u) in unitaries.iter().enumerate() {
            if u.dim() != (q, q) {
                return Err(Error::DimensionMismatch(format!(
                    "controlled unitary {index} has shape {:?}, expected ({q}, {q})",
                    u.dim()
                )));
            }
            let residual = unitarity_residual(u);
            if !(residual <= UNITARITY_TOL) {
                return Err(Error::NonUnitary { index, residual });
            }
        }
        let two_qudit = assemble_two_qudit(q, &unitaries);
        Ok(Self { q, controlled: unitaries, two_qudit })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn controlled(&self) -> &[CMat] {
        &self.controlled
    }

    pub fn two_qudit(&self) -> &CMat {
        &self.two_qudit
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&GateSetJson::from(self)).expect("gate set serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: GateSetJson =
            serde_json::from_str(s).map_err(|e| Error::InvalidArgument(format!("gate set JSON: {e}")))?;
        doc.into_gate_set()
    }
}

fn assemble_two_qudit(q: usize, us: &[CMat]) -> CMat {
    let mut u = CMat::zeros((q * q, q * q));
    for a in 0..q {
        for b in 0..q {
            for i in 0..q {
                u[[b * q + i, a * q + b]] = us[b][[i, a]];
            }
        }
    }
    u
}

pub fn make_gate_set(q: usize, unitaries: Vec<CMat>) -> Result<ControlledGateSet> {
    ControlledGateSet::new(q, unitaries)
}

/// Model A: `u_0 = exp(−iKπσ^z)`, `u_1 = exp(+iKπσ^z)`.
pub fn model_a(k: f64) -> ControlledGateSet {
    let z = pauli_z();
    ControlledGateSet::new(2, vec![exp_pauli(k * PI, &z), exp_pauli(-k * PI, &z)]).expect("model A is unitary")
}

/// Model B: `u_0 = exp(−iKπσ^z)`, `u_1 = σ^x`.
pub fn model_b(k: f64) -> ControlledGateSet {
    ControlledGateSet::new(2, vec![exp_pauli(k * PI, &pauli_z()), pauli_x()]).expect("model B is unitary")
}

/// Model C: `u_0 = exp(−iθσ^z)`, `u_1 = exp(−iθσ^x)`.
pub fn model_c(theta: f64) -> ControlledGateSet {
    ControlledGateSet::new(2, vec![exp_pauli(theta, &pauli_z()), exp_pauli(theta, &pauli_x())])
        .expect("model C is unitary")
}

/// Replace every `u_a` by `v u_a v†`.
pub fn conjugate_deform(gs: &ControlledGateSet, v: &CMat) -> Result<ControlledGateSet> {
    if v.dim() != (gs.q, gs.q) {
        return Err(Error::DimensionMismatch(format!("deformation has shape {:?}", v.dim())));
    }
    let residual = unitarity_residual(v);
    if !(residual <= 1e-10) {
        return Err(Error::NonUnitary { index: 0, residual });
    }
    let vd = dagger(v);
    ControlledGateSet::new(gs.q, gs.controlled.iter().map(|u| v.dot(u).dot(&vd)).collect())
}

#[derive(Serialize, Deserialize)]
struct GateSetJson {
    q: usize,
    controlled: Vec<Vec<Vec<[f64; 2]>>>,
}

impl From<&ControlledGateSet> for GateSetJson {
    fn from(gs: &ControlledGateSet) -> Self {
        let controlled = gs
            .controlled
            .iter()
            .map(|m| m.rows().into_iter().map(|r| r.iter().map(|z| [z.re, z.im]).collect()).collect())
            .collect();
        GateSetJson { q: gs.q, controlled }
    }
}

impl GateSetJson {
    fn into_gate_set(self) -> Result<ControlledGateSet> {
        let q = self.q;
        let mut mats = Vec::with_capacity(self.controlled.len());
        for (index, rows) in self.controlled.into_iter().enumerate() {
            if rows.len() != q || rows.iter().any(|r| r.len() != q) {
                return Err(Error::DimensionMismatch(format!("controlled matrix {index} is not {q}x{q}")));
            }
            let flat: Vec<C64> = rows.into_iter().flatten().map(|[re, im]| c(re, im)).collect();
            mats.push(CMat::from_shape_vec((q, q), flat).expect("shape checked"));
        }
        ControlledGateSet::new(q, mats)
    }
}

/// Product initial state of the bath: `ψ_e` on even sites and `ψ_o` on odd sites.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductInitialState {
    pub psi_e: CVec,
    pub psi_o: CVec,
}

impl ProductInitialState {
    pub fn new(psi_e: CVec, psi_o: CVec) -> Result<Self> {
        for v in [&psi_e, &psi_o] {
            let n = vec_norm(v);
            if (n - 1.0).abs() > 1e-12 {
                return Err(Error::NotNormalized(n));
            }
        }
        if psi_e.len() != psi_o.len() {
            return Err(Error::DimensionMismatch("even and odd states differ in dimension".into()));
        }
        Ok(Self { psi_e, psi_o })
    }

    /// Both sublattices in `(|0⟩+...+|q−1⟩)/√q`.
    pub fn plus(q: usize) -> Self {
        Self { psi_e: plus_state(q), psi_o: plus_state(q) }
    }

    pub fn q(&self) -> usize {
        self.psi_e.len()
    }
}

/// A Hermitian observable on the impurity.
#[derive(Clone, Debug, PartialEq)]
pub struct ImpurityObservable {
    pub matrix: CMat,
    pub label: String,
}

impl ImpurityObservable {
    pub fn new(matrix: CMat, label: impl Into<String>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch("observable is not square".into()));
        }
        let h = hermiticity_residual(&matrix);
        if h > 1e-12 {
            return Err(Error::InvalidArgument(format!("observable is not Hermitian (residual {h:.3e})")));
        }
        Ok(Self { matrix, label: label.into() })
    }

    pub fn sigma_x() -> Self {
        Self { matrix: pauli_x(), label: "sigma_x".into() }
    }

    pub fn sigma_y() -> Self {
        Self { matrix: pauli_y(), label: "sigma_y".into() }
    }

    pub fn sigma_z() -> Self {
        Self { matrix: pauli_z(), label: "sigma_z".into() }
    }

    pub fn identity(q: usize) -> Self {
        Self { matrix: eye(q), label: "identity".into() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Builds U by looping over product basis states and applying the rule directly.
    fn loop_oracle(q: usize, us: &[CMat]) -> CMat {
        let mut u = CMat::zeros((q * q, q * q));
        for a in 0..q {
            for b in 0..q {
                let col = a * q + b;
                // output |b⟩ ⊗ u_b |a⟩
                let ua = us[b].column(a).to_owned();
                for (i, amp) in ua.iter().enumerate() {
                    u[[b * q + i, col]] += *amp;
                }
            }
        }
        u
    }

    #[test]
    fn identity_controls_give_swap() {
        let gs = make_gate_set(2, vec![eye(2), eye(2)]).unwrap();
        let mut swap = CMat::zeros((4, 4));
        for a in 0..2 {
            for b in 0..2 {
                swap[[b * 2 + a, a * 2 + b]] = ONE;
            }
        }
        assert_eq!(gs.two_qudit(), &swap);
    }

    #[test]
    fn sigma_z_controls() {
        let gs = make_gate_set(2, vec![pauli_z(), pauli_z()]).unwrap();
        assert!(unitarity_residual(gs.two_qudit()) <= 1e-12);
        // U = SWAP (σ^z ⊗ I)
        let swap = make_gate_set(2, vec![eye(2), eye(2)]).unwrap().two_qudit().clone();
        let expect = swap.dot(&kron(&pauli_z(), &eye(2)));
        assert!(max_abs_diff(gs.two_qudit(), &expect) < 1e-15);
    }

    #[test]
    fn matches_basis_loop_oracle() {
        let us = vec![exp_pauli(PI / 3.0, &pauli_z()), exp_pauli(PI / 3.0, &pauli_x())];
        let gs = make_gate_set(2, us.clone()).unwrap();
        assert!(max_abs_diff(gs.two_qudit(), &loop_oracle(2, &us)) < 1e-15);
    }

    #[test]
    fn rejects_non_unitary_and_bad_shapes() {
        let bad = eye(2).mapv(|z| z * 1.1);
        match make_gate_set(2, vec![eye(2), bad]) {
            Err(Error::NonUnitary { index: 1, residual }) => assert!(residual > 0.2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(make_gate_set(2, vec![eye(2)]), Err(Error::DimensionMismatch(_))));
        assert!(matches!(make_gate_set(2, vec![eye(2), eye(3)]), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn model_parameter_points() {
        let a = model_a(0.0);
        assert_eq!(a.controlled()[0], eye(2));
        assert_eq!(a.controlled()[1], eye(2));
        let a = model_a(0.5);
        assert!(max_abs_diff(&a.controlled()[0], &pauli_z().mapv(|z| -I * z)) < 1e-15);
        let b = model_b(0.0);
        assert!(max_abs_diff(&b.controlled()[0], &eye(2)) < 1e-15);
        assert_eq!(b.controlled()[1], pauli_x());
        let cc = model_c(0.0);
        assert_eq!(cc.controlled()[1], eye(2));
        for k in [0.1, 0.6931, 1.7] {
            let g = model_a(k);
            let (u0, u1) = (&g.controlled()[0], &g.controlled()[1]);
            assert!(max_abs_diff(&u0.dot(u1), &u1.dot(u0)) <= 1e-12);
        }
    }

    #[test]
    fn deform_by_identity_is_noop() {
        let gs = model_b(0.7);
        let d = conjugate_deform(&gs, &eye(2)).unwrap();
        assert!(max_abs_diff(d.two_qudit(), gs.two_qudit()) < 1e-15);
        assert!(conjugate_deform(&gs, &eye(2).mapv(|z| z * 2.0)).is_err());
    }

    #[test]
    fn json_round_trip_is_bit_identical() {
        let gs = conjugate_deform(&model_c(1.234567), &exp_pauli(0.01, &pauli_y())).unwrap();
        let back = ControlledGateSet::from_json(&gs.to_json()).unwrap();
        assert_eq!(back, gs);
    }

    #[test]
    fn initial_state_validation() {
        assert!(ProductInitialState::new(plus_state(2), basis_state(2, 0)).is_ok());
        let bad = plus_state(2).mapv(|z| z * 2.0);
        assert!(matches!(ProductInitialState::new(bad, plus_state(2)), Err(Error::NotNormalized(_))));
        assert!(ImpurityObservable::new(pauli_y(), "y").is_ok());
        assert!(ImpurityObservable::new(pauli_y().mapv(|z| z * I), "iy").is_err());
    }
}
