use crate::error::{Error, Result};
use crate::linalg::*;

/// A CPTP map on the impurity given by Kraus operators.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumChannel {
    pub kraus: Vec<CMat>,
    pub label: String,
}

const TP_TOL: f64 = 1e-10;

impl QuantumChannel {
    pub fn new(kraus: Vec<CMat>, label: impl Into<String>) -> Result<Self> {
        let ch = Self { kraus, label: label.into() };
        if ch.kraus.is_empty() {
            return Err(Error::InvalidArgument("channel has no Kraus operators".into()));
        }
        let q = ch.q();
        if ch.kraus.iter().any(|k| k.dim() != (q, q)) {
            return Err(Error::DimensionMismatch("Kraus operators differ in shape".into()));
        }
        let r = ch.tp_residual();
        if !(r <= TP_TOL) {
            return Err(Error::NonTracePreserving(r));
        }
        Ok(ch)
    }

    pub fn q(&self) -> usize {
        self.kraus[0].nrows()
    }

    pub fn identity(q: usize) -> Self {
        Self { kraus: vec![eye(q)], label: "identity".into() }
    }

    /// Erase-and-prepare: `ρ ↦ Tr(ρ) ρ_re`.
    pub fn causal_break(rho_re: &CMat) -> Result<Self> {
        density_check(rho_re, 1e-10).map_err(Error::NotADensityMatrix)?;
        Ok(Self { kraus: prepare_kraus(rho_re, 1.0), label: "break".into() })
    }

    /// `max |Σ K†K − I|`
    pub fn tp_residual(&self) -> f64 {
        let q = self.q();
        let mut s = CMat::zeros((q, q));
        for k in &self.kraus {
            s = s + dagger(k).dot(k);
        }
        max_abs_diff(&s, &eye(q))
    }

    /// `Σ_k K ρ K†`, also for non-Hermitian arguments.
    pub fn apply(&self, rho: &CMat) -> CMat {
        let mut out = CMat::zeros(rho.dim());
        for k in &self.kraus {
            out = out + k.dot(rho).dot(&dagger(k));
        }
        out
    }

    /// Matrix acting on row-major vectorized operators: `S[(i,j),(a,b)] = Σ_k K_ia conj(K_jb)`.
    pub fn superoperator(&self) -> CMat {
        let q = self.q();
        let mut s = CMat::zeros((q * q, q * q));
        for k in &self.kraus {
            for i in 0..q {
                for j in 0..q {
                    for a in 0..q {
                        for b in 0..q {
                            s[[i * q + j, a * q + b]] += k[[i, a]] * k[[j, b]].conj();
                        }
                    }
                }
            }
        }
        s
    }

    pub fn is_identity(&self) -> bool {
        let q = self.q();
        let s = self.superoperator();
        max_abs_diff(&s, &eye(q * q)) < 1e-14
    }

    /// Parses `identity`, `break:<state>`, `mix:p=<p>[,<state>]` or a JSON Kraus list
    /// `[[[ [re,im], ...], ...], ...]`. States: `0`, `1`, `+`, `-`, `+i`, `-i`, `mixed`.
    pub fn from_spec(q: usize, spec: &str) -> Result<Self> {
        let spec = spec.trim();
        if spec == "identity" {
            return Ok(Self::identity(q));
        }
        if let Some(state) = spec.strip_prefix("break:") {
            let mut ch = Self::causal_break(&named_state(q, state)?)?;
            ch.label = spec.to_string();
            return Ok(ch);
        }
        if let Some(rest) = spec.strip_prefix("mix:") {
            let mut parts = rest.split(',');
            let p_part = parts.next().unwrap_or("");
            let p: f64 = p_part
                .trim()
                .strip_prefix("p=")
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::InvalidArgument(format!("bad mixing rate in '{spec}'")))?;
            let state = parts.next().unwrap_or("+");
            let mut ch = mixed_channel(p, &named_state(q, state)?)?;
            ch.label = spec.to_string();
            return Ok(ch);
        }
        if spec.starts_with('[') {
            let raw: Vec<Vec<Vec<[f64; 2]>>> = serde_json::from_str(spec)
                .map_err(|e| Error::InvalidArgument(format!("Kraus list JSON: {e}")))?;
            let mut kraus = Vec::new();
            for m in raw {
                if m.len() != q || m.iter().any(|r| r.len() != q) {
                    return Err(Error::DimensionMismatch(format!("Kraus operator is not {q}x{q}")));
                }
                let flat: Vec<C64> = m.into_iter().flatten().map(|[re, im]| c(re, im)).collect();
                kraus.push(CMat::from_shape_vec((q, q), flat).expect("shape checked"));
            }
            return Self::new(kraus, "kraus");
        }
        Err(Error::InvalidArgument(format!("unknown channel '{spec}'")))
    }
}

fn prepare_kraus(rho_re: &CMat, weight: f64) -> Vec<CMat> {
    let q = rho_re.nrows();
    let (vals, vecs) = eigh(rho_re);
    let mut out = Vec::new();
    for k in 0..q {
        let lam = vals[k].max(0.0) * weight;
        if lam <= 1e-15 {
            continue;
        }
        for j in 0..q {
            let mut m = CMat::zeros((q, q));
            for i in 0..q {
                m[[i, j]] = vecs[[i, k]] * lam.sqrt();
            }
            out.push(m);
        }
    }
    out
}

/// `(1−p)·identity + p·(erase-prepare ρ_re)`.
pub fn mixed_channel(p: f64, rho_re: &CMat) -> Result<QuantumChannel> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::POutOfRange(p));
    }
    density_check(rho_re, 1e-10).map_err(Error::NotADensityMatrix)?;
    let q = rho_re.nrows();
    let mut kraus = Vec::new();
    if p < 1.0 {
        kraus.push(eye(q).mapv(|z| z * (1.0 - p).sqrt()));
    }
    if p > 0.0 {
        kraus.extend(prepare_kraus(rho_re, p));
    }
    QuantumChannel::new(kraus, format!("mix:p={p}"))
}

/// Density matrices for the named single-qudit states.
pub fn named_state(q: usize, name: &str) -> Result<CMat> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let ket = |v: Vec<C64>| -> CMat {
        let v = CVec::from(v);
        outer(&v, &v)
    };
    let name = name.trim();
    if name == "mixed" {
        return Ok(eye(q).mapv(|z| z / q as f64));
    }
    if let Ok(k) = name.parse::<usize>() {
        if k < q {
            return Ok(ket(basis_state(q, k).to_vec()));
        }
    }
    if name == "+" {
        return Ok(ket(plus_state(q).to_vec()));
    }
    if q == 2 {
        let v = match name {
            "-" => vec![c(s, 0.0), c(-s, 0.0)],
            "+i" => vec![c(s, 0.0), c(0.0, s)],
            "-i" => vec![c(s, 0.0), c(0.0, -s)],
            _ => return Err(Error::InvalidArgument(format!("unknown state '{name}'"))),
        };
        return Ok(ket(v));
    }
    Err(Error::InvalidArgument(format!("unknown state '{name}' for q = {q}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group_walk::haar::sample_haar_unitary;
    use rand::SeedableRng;

    fn random_density(q: usize, seed: u64) -> CMat {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let u = sample_haar_unitary(q, &mut rng);
        let d = CMat::from_diag(&ndarray::Array1::from_iter((0..q).map(|k| c((k + 1) as f64, 0.0))));
        let r = u.dot(&d).dot(&dagger(&u));
        let t = trace(&r);
        r.mapv(|z| z / t)
    }

    #[test]
    fn causal_break_prepares_state() {
        let rho_re = named_state(2, "+").unwrap();
        let ch = QuantumChannel::causal_break(&rho_re).unwrap();
        assert!(ch.tp_residual() < 1e-14);
        let out = ch.apply(&random_density(2, 1));
        assert!(max_abs_diff(&out, &rho_re) < 1e-14);
        let mixed = random_density(3, 4);
        let ch3 = QuantumChannel::causal_break(&mixed).unwrap();
        assert!(max_abs_diff(&ch3.apply(&random_density(3, 5)), &mixed) < 1e-13);
    }

    #[test]
    fn mixed_channel_endpoints_and_action() {
        let rho_re = named_state(2, "+").unwrap();
        let rho = random_density(2, 2);
        let id = mixed_channel(0.0, &rho_re).unwrap();
        assert!(max_abs_diff(&id.apply(&rho), &rho) < 1e-15);
        let br = mixed_channel(1.0, &rho_re).unwrap();
        assert!(max_abs_diff(&br.apply(&rho), &rho_re) < 1e-14);
        let half = mixed_channel(0.3, &rho_re).unwrap();
        let expect = rho.mapv(|z| z * 0.7) + rho_re.mapv(|z| z * 0.3);
        assert!(max_abs_diff(&half.apply(&rho), &expect) < 1e-14);
        assert!(matches!(mixed_channel(1.5, &rho_re), Err(Error::POutOfRange(_))));
        assert!(matches!(mixed_channel(0.5, &eye(2)), Err(Error::NotADensityMatrix(_))));
    }

    #[test]
    fn superoperator_matches_apply() {
        let ch = mixed_channel(0.4, &named_state(2, "0").unwrap()).unwrap();
        let rho = random_density(2, 7);
        let s = ch.superoperator();
        let v = ndarray::Array1::from_iter(rho.iter().copied());
        let out = s.dot(&v);
        let direct = ch.apply(&rho);
        for (a, b) in out.iter().zip(direct.iter()) {
            assert!((a - b).norm() < 1e-14);
        }
        assert!(QuantumChannel::identity(2).is_identity());
    }

    #[test]
    fn spec_parsing() {
        assert!(QuantumChannel::from_spec(2, "identity").unwrap().is_identity());
        let b = QuantumChannel::from_spec(2, "break:+").unwrap();
        assert!(max_abs_diff(&b.apply(&eye(2).mapv(|z| z * 0.5)), &named_state(2, "+").unwrap()) < 1e-14);
        assert!(QuantumChannel::from_spec(2, "mix:p=0.5").is_ok());
        assert!(QuantumChannel::from_spec(2, "[[[[1,0],[0,0]],[[0,0],[1,0]]]]").unwrap().is_identity());
        assert!(matches!(
            QuantumChannel::from_spec(2, "[[[[2,0],[0,0]],[[0,0],[1,0]]]]"),
            Err(Error::NonTracePreserving(_))
        ));
        assert!(QuantumChannel::from_spec(2, "nope").is_err());
    }
}
