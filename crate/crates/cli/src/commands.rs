use crate::config::{number, Command, ConfigError, RunConfig};
use crate::Artifact;
use crate::Failure;
use im_lab::gates::{conjugate_deform, model_a, model_b, model_c, ControlledGateSet, ImpurityObservable, ProductInitialState};
use im_lab::group_walk::{build_covering, classify_growth, reachable_set};
use im_lab::influence_matrix::{build_exact_im, grow_im_truncated, temporal_entanglement};
use im_lab::linalg::{exp_pauli, pauli_y, CMat, CVec};
use im_lab::memory::negativity_histogram;
use im_lab::spectral::lss_report_capped;
use im_lab::stochastic::{
    estimate_observable_series, exact_observable_via_transfer, named_state, snapped_walk_observable, QuantumChannel,
    WalkConfig,
};
use serde_json::json;

pub fn dispatch(cfg: &RunConfig) -> Result<Artifact, Failure> {
    match cfg.command.expect("validated") {
        Command::Growth => growth(cfg),
        Command::Tee => tee(cfg),
        Command::Montecarlo => montecarlo(cfg),
        Command::Exact => exact(cfg),
        Command::Spectrum => spectrum(cfg),
        Command::Negativity => negativity(cfg),
        Command::Covering => covering(cfg),
    }
}

fn gate_set(cfg: &RunConfig) -> Result<ControlledGateSet, Failure> {
    let gs = match cfg.model.as_deref().expect("validated") {
        "a" => model_a(number(&cfg.k).expect("validated")),
        "b" => model_b(number(&cfg.k).expect("validated")),
        "c" => model_c(number(&cfg.theta).expect("validated")),
        _ => {
            let path = cfg.gates.as_ref().expect("validated");
            let text = std::fs::read_to_string(path)
                .map_err(|e| ConfigError::new("gates", format!("{}: {e}", path.display())))?;
            ControlledGateSet::from_json(&text)?
        }
    };
    match number(&cfg.deform_y) {
        Some(angle) if gs.q() == 2 => Ok(conjugate_deform(&gs, &exp_pauli(angle, &pauli_y()))?),
        Some(_) => Err(ConfigError::new("deform-y", "needs a qubit gate set").into()),
        None => Ok(gs),
    }
}

/// Ket for a named pure state.
fn pure_state(q: usize, field: &str, name: &str) -> Result<CVec, Failure> {
    let rho = named_state(q, name).map_err(|e| ConfigError::new(field, e.to_string()))?;
    let k = (0..q).max_by(|&i, &j| rho[[i, i]].re.total_cmp(&rho[[j, j]].re)).unwrap();
    let v = rho.column(k).mapv(|z| z / rho[[k, k]].re.sqrt());
    let purity: f64 = rho.dot(&rho).diag().iter().map(|z| z.re).sum();
    if (purity - 1.0).abs() > 1e-10 {
        return Err(ConfigError::new(field, format!("'{name}' is not a pure state")).into());
    }
    Ok(v)
}

fn bath(cfg: &RunConfig, q: usize) -> Result<ProductInitialState, Failure> {
    let e = pure_state(q, "psi-e", cfg.psi_e.as_deref().expect("validated"))?;
    let o = pure_state(q, "psi-o", cfg.psi_o.as_deref().expect("validated"))?;
    Ok(ProductInitialState::new(e, o)?)
}

fn observable(cfg: &RunConfig) -> ImpurityObservable {
    match cfg.obs.as_deref() {
        Some("y") => ImpurityObservable::sigma_y(),
        Some("z") => ImpurityObservable::sigma_z(),
        _ => ImpurityObservable::sigma_x(),
    }
}

struct Walk {
    gs: ControlledGateSet,
    state: ProductInitialState,
    rho: CMat,
    channel: QuantumChannel,
    obs: ImpurityObservable,
}

fn walk_inputs(cfg: &RunConfig) -> Result<Walk, Failure> {
    let gs = gate_set(cfg)?;
    let q = gs.q();
    if q != 2 {
        return Err(ConfigError::new("model", "walk observables are qubit operators").into());
    }
    let state = bath(cfg, q)?;
    let rho = named_state(q, cfg.rho_imp.as_deref().expect("validated"))
        .map_err(|e| ConfigError::new("rho-imp", e.to_string()))?;
    let channel = QuantumChannel::from_spec(q, cfg.channel.as_deref().expect("validated"))
        .map_err(|e| ConfigError::new("channel", e.to_string()))?;
    Ok(Walk { gs, state, rho, channel, obs: observable(cfg) })
}

fn f(x: f64) -> String {
    format!("{x}")
}

fn growth(cfg: &RunConfig) -> Result<Artifact, Failure> {
    let gs = gate_set(cfg)?;
    let rs = reachable_set(&gs, cfg.t.unwrap(), cfg.tol.unwrap())?;
    let rows = rs.counts.iter().enumerate().map(|(t, n)| vec![t.to_string(), n.to_string()]).collect();
    let summary = classify_growth(&rs).ok().map(|v| {
        json!({
            "class": format!("{:?}", v.class_label).to_lowercase(),
            "fit_exponent": v.fit_exponent,
            "evidence_window": [v.evidence_window.0, v.evidence_window.1],
            "residual": v.residual,
        })
    });
    Ok(Artifact { columns: vec!["T", "count"], rows, summary })
}

fn tee(cfg: &RunConfig) -> Result<Artifact, Failure> {
    let gs = gate_set(cfg)?;
    let state = bath(cfg, gs.q())?;
    let mut rows = Vec::new();
    let mut max_curve = Vec::new();
    for t in cfg.t_min.unwrap()..=cfg.t.unwrap() {
        let mps = match cfg.chi {
            Some(chi) => grow_im_truncated(&gs, &state, t, chi)?,
            None => build_exact_im(&gs, &state, t)?,
        };
        let prof = temporal_entanglement(&mps)?;
        let chi = cfg.chi.map_or_else(|| "exact".to_string(), |c| c.to_string());
        for (cut, s) in prof.per_cut_entropy.iter().enumerate() {
            rows.push(vec![t.to_string(), (cut + 1).to_string(), f(*s), f(prof.max_entropy), chi.clone()]);
        }
        max_curve.push(json!({ "T": t, "max_entropy": prof.max_entropy }));
    }
    let summary = Some(json!({ "units": "nats", "chi": cfg.chi, "max_entropy": max_curve }));
    Ok(Artifact { columns: vec!["T", "cut", "entropy", "max_entropy", "chi"], rows, summary })
}

fn montecarlo(cfg: &RunConfig) -> Result<Artifact, Failure> {
    let w = walk_inputs(cfg)?;
    let seed = cfg.seed.unwrap();
    let wc = WalkConfig {
        gs: w.gs,
        state: w.state,
        rho_imp: w.rho,
        channel: w.channel,
        t: cfg.t.unwrap(),
        n_samples: cfg.n.unwrap(),
        seed,
    };
    let series = estimate_observable_series(&wc, &w.obs)?;
    let rows = series
        .iter()
        .enumerate()
        .map(|(i, e)| vec![(i + 1).to_string(), f(e.mean), f(e.stderr), e.n.to_string(), seed.to_string()])
        .collect();
    Ok(Artifact { columns: vec!["T", "mean", "stderr", "n", "seed"], rows, summary: None })
}

fn exact(cfg: &RunConfig) -> Result<Artifact, Failure> {
    let w = walk_inputs(cfg)?;
    let rows = (0..=cfg.t.unwrap())
        .map(|t| {
            let v = exact_observable_via_transfer(&w.gs, &w.state, &w.rho, &w.channel, &w.obs, t)?;
            Ok(vec![t.to_string(), f(v)])
        })
        .collect::<Result<_, im_lab::Error>>()?;
    Ok(Artifact { columns: vec!["T", "value"], rows, summary: None })
}

fn spectrum(cfg: &RunConfig) -> Result<Artifact, Failure> {
    let gs = gate_set(cfg)?;
    let rep = lss_report_capped(&gs, cfg.l.unwrap(), cfg.max_l.unwrap())?;
    let h = &rep.histogram;
    let rows = h.densities.iter().enumerate().map(|(i, d)| vec![f(h.edges[i]), f(h.edges[i + 1]), f(*d)]).collect();
    let summary = json!({
        "L": rep.l,
        "mean_ratio": rep.mean_ratio,
        "degenerate_fraction": rep.degenerate_fraction,
        "unimodularity": rep.unimodularity,
    });
    Ok(Artifact { columns: vec!["r_bin_left", "r_bin_right", "density"], rows, summary: Some(summary) })
}

fn negativity(cfg: &RunConfig) -> Result<Artifact, Failure> {
    let h = negativity_histogram(cfg.q.unwrap(), cfg.n.unwrap(), cfg.seed.unwrap())?;
    let rows = h.counts.iter().enumerate().map(|(i, n)| vec![f(h.edges[i]), f(h.edges[i + 1]), n.to_string()]).collect();
    let summary = json!({
        "q": h.q,
        "n_samples": h.n_samples,
        "seed": h.seed,
        "mean": h.mean,
        "median": h.median,
        "min": h.min,
        "max": h.max,
        "fraction_positive": h.fraction_positive,
    });
    Ok(Artifact { columns: vec!["bin_left", "bin_right", "count"], rows, summary: Some(summary) })
}

fn covering(cfg: &RunConfig) -> Result<Artifact, Failure> {
    let w = walk_inputs(cfg)?;
    let delta = cfg.delta.unwrap();
    let grid = build_covering(delta)?;
    let mut rows = Vec::new();
    for t in 0..=cfg.t.unwrap() {
        let wc = WalkConfig {
            gs: w.gs.clone(),
            state: w.state.clone(),
            rho_imp: w.rho.clone(),
            channel: w.channel.clone(),
            t,
            n_samples: 1,
            seed: 0,
        };
        let snapped = snapped_walk_observable(&wc, &w.obs, &grid)?;
        let exact = exact_observable_via_transfer(&w.gs, &w.state, &w.rho, &w.channel, &w.obs, t)?;
        let bound = (1.0 + delta * (t * t) as f64).powi(t as i32) - 1.0;
        rows.push(vec![t.to_string(), f(snapped), f(exact), f((snapped - exact).abs()), f(bound)]);
    }
    let summary = json!({ "delta": delta, "grid_points": grid.len() });
    Ok(Artifact { columns: vec!["T", "snapped", "exact", "abs_error", "bound"], rows, summary: Some(summary) })
}
