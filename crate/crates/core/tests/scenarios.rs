use flowinfer::diagnostics::Observable;
use flowinfer::samplers::KernelParams;
use flowinfer::scenarios::{
    build_reference, chain_seed, desk_scale, evaluate_observables, example1, example2, scenario, Level,
    ReferenceBudget, ReferencePosterior, Scenario,
};

#[test]
fn full_scale_sizes() {
    let e1 = example1(2024).unwrap();
    assert_eq!(e1.observations.len(), 1024);
    assert_eq!(e1.index_set().unwrap().component_count(), 198);
    assert!(e1.observations.iter().all(|p| p.t > 0.0 && p.t <= 1.0));
    let e2 = example2().unwrap();
    assert_eq!(e2.observations.len(), 100);
    assert_eq!(e2.kappa, 3e-5);
}

#[test]
fn desk_scale_sizes() {
    let s = scenario("example1", Level::Small, 2024).unwrap();
    assert_eq!(s.observations.len(), 256);
    assert_eq!(s.index_set().unwrap().component_count(), 50);
    assert_eq!(s.reference.chains, 40);
    assert_eq!(s.reference.steps, 5_000);
    let r = s.reductions.as_ref().unwrap();
    assert_eq!(r.observations, 1024);
    assert_eq!(r.sampling_cutoff, 8.0);
    let s2 = scenario("example2", Level::Small, 0).unwrap();
    assert_eq!(s2.observations.len(), 100);
    assert_eq!(s2.reference.kernel, KernelParams::Hmc { epsilon: 0.125, tau: 4.0 });
}

#[test]
fn reduction_is_idempotent_and_reversible() {
    let full = example1(7).unwrap();
    let small = desk_scale(&full, Level::Small).unwrap();
    assert_eq!(desk_scale(&small, Level::Small).unwrap(), small);
    let back = desk_scale(&small, Level::Paper).unwrap();
    assert_eq!(back.observations.len(), 1024);
    assert_eq!(back.sampling_cutoff, full.sampling_cutoff);
    assert_eq!(back.solver, full.solver);
}

#[test]
fn reduced_observations_are_a_prefix() {
    let full = example1(3).unwrap();
    let small = desk_scale(&full, Level::Small).unwrap();
    assert_eq!(&full.observations[..256], &small.observations[..]);
}

#[test]
fn json_round_trip_is_exact() {
    for s in [scenario("example1", Level::Small, 11).unwrap(), scenario("example2", Level::Medium, 0).unwrap()] {
        let text = s.to_json().unwrap();
        let back = Scenario::from_json(&text).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.to_json().unwrap(), text);
    }
}

#[test]
fn invalid_json_is_rejected() {
    let mut s = scenario("example1", Level::Small, 1).unwrap();
    s.sigma_eta = -1.0;
    assert!(Scenario::from_json(&s.to_json().unwrap()).is_err());
    let mut s = scenario("example1", Level::Small, 1).unwrap();
    s.solver.cutoff = 3;
    assert!(s.validate().is_err());
    assert!(scenario("example3", Level::Small, 1).is_err());
}

#[test]
fn seeds_change_the_truth_and_points() {
    let a = example1(1).unwrap();
    let b = example1(2).unwrap();
    assert_ne!(a.true_field, b.true_field);
    assert_ne!(a.observations, b.observations);
    assert_eq!(example1(1).unwrap(), a);
}

#[test]
fn cellular_truth_components() {
    let s = scenario("example2", Level::Small, 0).unwrap();
    let v = s.true_components().unwrap();
    assert_eq!(v.0[2], -8.0);
    assert_eq!(v.0[4], 8.0);
    assert_eq!(v.0.iter().filter(|x| **x != 0.0).count(), 2);
}

#[test]
fn chain_seeds_are_distinct() {
    let seeds: std::collections::BTreeSet<u64> = (0..64).map(|i| chain_seed(1000, i)).collect();
    assert_eq!(seeds.len(), 64);
    assert_eq!(chain_seed(6, 3), 5);
}

#[test]
fn small_reference_pools_every_chain() {
    let s = scenario("example1", Level::Small, 2024).unwrap();
    let data = s.generate_data(false, 0).unwrap();
    let budget = ReferenceBudget { kernel: KernelParams::Pcn { beta: 0.2 }, chains: 2, steps: 12, burn_in: 2, seed: 9 };
    let (r, records) = build_reference(&s, &data, budget, 16).unwrap();
    assert_eq!(records.len(), 2);
    assert_eq!(r.samples, 20);
    assert_eq!(r.components.len(), 50);
    assert!(r.components.iter().all(|c| c.histogram.total() == 20 && c.density.len() == 16));
    let again = build_reference(&s, &data, budget, 16).unwrap().0;
    assert_eq!(again, r);
    let text = serde_json::to_string(&r).unwrap();
    let back: ReferencePosterior = serde_json::from_str(&text).unwrap();
    assert_eq!(back, r);
    let bad = ReferenceBudget { burn_in: 12, ..budget };
    assert!(build_reference(&s, &data, bad, 16).is_err());
}

#[test]
fn observables_of_a_component_vector() {
    let s = scenario("example2", Level::Small, 0).unwrap();
    let v = s.true_components().unwrap();
    let idx = s.index_set().unwrap();
    let out = evaluate_observables(&[Observable::Enstrophy], &v, &idx, None, s.kappa).unwrap();
    assert!((out[0] - 128.0 * std::f64::consts::PI.powi(2)).abs() < 1e-9);
    assert!(evaluate_observables(&[Observable::ScalarVariance], &v, &idx, None, s.kappa).is_err());
    let p = s.problem().unwrap();
    let out = evaluate_observables(&[Observable::ScalarVariance], &v, &idx, Some(&p), s.kappa).unwrap();
    assert!(out[0] > 0.0 && out[0] < 1.0 / 16.0);
}
