//! Dense tensor-product registers of qudits and in-place gate application.
//!
//! Slot 0 is the slowest-varying digit of the flat index.

use crate::linalg::*;

#[derive(Clone, Copy, Debug)]
pub struct Register {
    pub q: usize,
    pub slots: usize,
}

impl Register {
    pub fn new(q: usize, slots: usize) -> Self {
        Self { q, slots }
    }

    pub fn dim(&self) -> usize {
        self.q.pow(self.slots as u32)
    }

    pub fn stride(&self, slot: usize) -> usize {
        self.q.pow((self.slots - 1 - slot) as u32)
    }

    /// Applies `m` (q²×q², index `d_i q + d_j`) to slots `i` and `j`.
    pub fn apply_two(&self, state: &mut [C64], i: usize, j: usize, m: &CMat) {
        let q = self.q;
        let (si, sj) = (self.stride(i), self.stride(j));
        let mut buf = vec![ZERO; q * q];
        let mut out = vec![ZERO; q * q];
        for base in 0..state.len() {
            if (base / si) % q != 0 || (base / sj) % q != 0 {
                continue;
            }
            for di in 0..q {
                for dj in 0..q {
                    buf[di * q + dj] = state[base + di * si + dj * sj];
                }
            }
            for (r, o) in out.iter_mut().enumerate() {
                let mut acc = ZERO;
                for (k, b) in buf.iter().enumerate() {
                    acc += m[[r, k]] * b;
                }
                *o = acc;
            }
            for di in 0..q {
                for dj in 0..q {
                    state[base + di * si + dj * sj] = out[di * q + dj];
                }
            }
        }
    }

    /// Applies `m` (q×q) to slot `i`.
    pub fn apply_one(&self, state: &mut [C64], i: usize, m: &CMat) {
        let q = self.q;
        let si = self.stride(i);
        let mut buf = vec![ZERO; q];
        for base in 0..state.len() {
            if (base / si) % q != 0 {
                continue;
            }
            for d in 0..q {
                buf[d] = state[base + d * si];
            }
            for r in 0..q {
                let mut acc = ZERO;
                for (k, b) in buf.iter().enumerate() {
                    acc += m[[r, k]] * b;
                }
                state[base + r * si] = acc;
            }
        }
    }

    /// `Σ_rest ⟨rest, b'| bra⟩* O_{b' b} ⟨rest, b|ket⟩`-style contraction on a single slot:
    /// returns `⟨bra| O_i |ket⟩`.
    pub fn expectation_one(&self, bra: &[C64], ket: &[C64], i: usize, o: &CMat) -> C64 {
        let q = self.q;
        let si = self.stride(i);
        let mut acc = ZERO;
        for base in 0..ket.len() {
            if (base / si) % q != 0 {
                continue;
            }
            for r in 0..q {
                let mut v = ZERO;
                for k in 0..q {
                    v += o[[r, k]] * ket[base + k * si];
                }
                acc += bra[base + r * si].conj() * v;
            }
        }
        acc
    }
}

/// Flattened tensor product of vectors (first factor slowest).
pub fn kron_vecs(parts: &[CVec]) -> Vec<C64> {
    let mut out = vec![ONE];
    for p in parts {
        let mut next = Vec::with_capacity(out.len() * p.len());
        for a in &out {
            for b in p.iter() {
                next.push(a * b);
            }
        }
        out = next;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn apply_two_matches_kron() {
        // three qubits, gate on slots (2, 0) compared with an explicit permuted kron
        let reg = Register::new(2, 3);
        let psi: Vec<C64> = (0..8).map(|k| c(k as f64 * 0.1 + 0.3, (k * k) as f64 * 0.05)).collect();
        let u = kron(&exp_pauli(0.3, &pauli_x()), &exp_pauli(0.7, &pauli_y()));
        let mut s = psi.clone();
        reg.apply_two(&mut s, 2, 0, &u);
        // slot 2 gets the first factor, slot 0 the second
        let full = kron(&kron(&exp_pauli(0.7, &pauli_y()), &eye(2)), &exp_pauli(0.3, &pauli_x()));
        let expect = full.dot(&CVec::from(psi));
        for (a, b) in s.iter().zip(expect.iter()) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn expectation_of_single_slot() {
        let reg = Register::new(2, 2);
        let psi = kron_vecs(&[basis_state(2, 1), plus_state(2)]);
        let x = reg.expectation_one(&psi, &psi, 1, &pauli_x());
        let z = reg.expectation_one(&psi, &psi, 0, &pauli_z());
        assert!((x - ONE).norm() < 1e-15 && (z + ONE).norm() < 1e-15);
    }
}
