//! Cross-module checks through the public API.

use im_lab::gates::{model_b, model_c, ImpurityObservable, ProductInitialState};
use im_lab::group_walk::{reachable_set, DEFAULT_TOL};
use im_lab::influence_matrix::{
    brute_force_observable, build_exact_im, compress, contract_with_process, grow_im_truncated, temporal_entanglement,
};
use im_lab::stochastic::{exact_observable_via_transfer, mixed_channel, named_state, QuantumChannel};
use proptest::prelude::*;
use std::f64::consts::PI;

#[test]
fn model_c_causal_break_at_five_steps() {
    let gs = model_c(PI / 3.0);
    let st = ProductInitialState::plus(2);
    let rho = named_state(2, "0").unwrap();
    let ch = QuantumChannel::causal_break(&named_state(2, "+").unwrap()).unwrap();
    let obs = ImpurityObservable::sigma_x();
    let t = 5;
    let chans = vec![ch.clone(); t - 1];
    let brute = brute_force_observable(&gs, &st, &rho, &chans, &obs, t).unwrap();
    let im = contract_with_process(&build_exact_im(&gs, &st, t).unwrap(), &rho, &chans, &obs).unwrap();
    let tr = exact_observable_via_transfer(&gs, &st, &rho, &ch, &obs, t).unwrap();
    assert!((im - brute).abs() < 1e-9, "{im} vs {brute}");
    assert!((tr - brute).abs() < 1e-9, "{tr} vs {brute}");
}

#[test]
fn exact_bond_dimension_is_the_reachable_count() {
    let gs = model_b(0.3);
    let t = 7;
    let counts = reachable_set(&gs, t, DEFAULT_TOL).unwrap().counts;
    let dims = build_exact_im(&gs, &ProductInitialState::plus(2), t).unwrap().bond_dims();
    // internal cut k carries the set reached after k steps
    assert_eq!(dims.len(), t - 1);
    for (i, d) in dims.iter().enumerate() {
        assert_eq!(*d, counts[i + 1], "cut {}", i + 1);
    }
}

#[test]
fn truncation_changes_little_at_modest_chi() {
    let gs = model_c(PI / 3.0);
    let st = ProductInitialState::plus(2);
    let t = 5;
    let exact = build_exact_im(&gs, &st, t).unwrap();
    let small = grow_im_truncated(&gs, &st, t, 64).unwrap();
    let rho = named_state(2, "+").unwrap();
    let chans = vec![QuantumChannel::identity(2); t - 1];
    let obs = ImpurityObservable::sigma_z();
    let a = contract_with_process(&exact, &rho, &chans, &obs).unwrap();
    let b = contract_with_process(&small, &rho, &chans, &obs).unwrap();
    assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    let s_exact = temporal_entanglement(&exact).unwrap().max_entropy;
    let s_small = temporal_entanglement(&small).unwrap().max_entropy;
    assert!((s_exact - s_small).abs() < 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn im_matches_chain_for_mixed_channels(theta in 0.1f64..3.0, p in 0.0f64..=1.0, t in 1usize..=4) {
        let gs = model_c(theta);
        let st = ProductInitialState::plus(2);
        let rho = named_state(2, "+i").unwrap();
        let ch = mixed_channel(p, &named_state(2, "1").unwrap()).unwrap();
        let obs = ImpurityObservable::sigma_y();
        let chans = vec![ch.clone(); t - 1];
        let brute = brute_force_observable(&gs, &st, &rho, &chans, &obs, t).unwrap();
        let im = contract_with_process(&build_exact_im(&gs, &st, t).unwrap(), &rho, &chans, &obs).unwrap();
        prop_assert!((im - brute).abs() < 1e-9);
        let tr = exact_observable_via_transfer(&gs, &st, &rho, &ch, &obs, t).unwrap();
        prop_assert!((tr - brute).abs() < 1e-9);
    }

    #[test]
    fn compressed_entropy_is_bounded_by_chi(theta in 0.1f64..3.0, chi in 1usize..6) {
        let gs = model_c(theta);
        let mps = build_exact_im(&gs, &ProductInitialState::plus(2), 4).unwrap();
        let cut = compress(&mps, chi, 1e-14).unwrap();
        let bound = (chi as f64).ln() + 1e-9;
        let prof = temporal_entanglement(&cut.mps).unwrap();
        for s in &prof.per_cut_entropy {
            prop_assert!(*s <= bound);
        }
        prop_assert!(cut.discarded.iter().all(|&w| (-1e-12..=1.0).contains(&w)));
    }
}

#[test]
fn mixing_rate_curve_stays_between_its_endpoints() {
    let gs = model_c(PI / 3.0);
    let st = ProductInitialState::plus(2);
    let rho = named_state(2, "0").unwrap();
    let rho_re = named_state(2, "+").unwrap();
    let obs = ImpurityObservable::sigma_x();
    let t = 12;
    let curve: Vec<f64> = [0.0, 0.25, 0.5, 0.75, 1.0]
        .iter()
        .map(|&p| exact_observable_via_transfer(&gs, &st, &rho, &mixed_channel(p, &rho_re).unwrap(), &obs, t).unwrap())
        .collect();
    let (lo, hi) = (curve[0].min(curve[4]), curve[0].max(curve[4]));
    assert!(curve.iter().all(|v| v.abs() <= 1.0));
    assert!(curve[2] >= lo - 1e-3 && curve[2] <= hi + 1e-3, "{curve:?}");
}
