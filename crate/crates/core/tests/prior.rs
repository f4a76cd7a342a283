use std::f64::consts::PI;

use flowinfer::field::{FlowIndexSet, WaveVector};
use flowinfer::inference::{kraichnan_energy, KraichnanPrior, PriorParams};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

const DRAWS: usize = 20_000;

#[test]
fn component_variances_match_the_spectrum() {
    let idx = FlowIndexSet::new(4.0).unwrap();
    let prior = KraichnanPrior::new(PriorParams::standard(), &idx).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(12);
    let d = prior.dim();
    let mut sum = vec![0.0; d];
    let mut sq = vec![0.0; d];
    for _ in 0..DRAWS {
        for (l, x) in prior.sample(&mut rng).0.iter().enumerate() {
            sum[l] += x;
            sq[l] += x * x;
        }
    }
    let n = DRAWS as f64;
    for l in 0..d {
        let var = prior.variances()[l];
        let mean = sum[l] / n;
        let second = sq[l] / n;
        if var == 0.0 {
            assert_eq!(second, 0.0);
            continue;
        }
        assert!(mean.abs() <= 4.0 * (var / n).sqrt(), "component {l} mean {mean}");
        // the sample second moment has standard error var·√(2/n)
        assert!((second - var).abs() <= 4.0 * var * (2.0 / n).sqrt(), "component {l}: {second} vs {var}");
    }
}

#[test]
fn variance_follows_energy_over_wavenumber() {
    let params = PriorParams::standard();
    let idx = FlowIndexSet::new(8.0).unwrap();
    let prior = KraichnanPrior::new(params, &idx).unwrap();
    assert_eq!(prior.dim(), 198);
    for (j, k) in idx.representatives().iter().enumerate() {
        let kn = k.norm();
        let expected = kraichnan_energy(kn, params.e0, params.n, params.xi).unwrap() / (2.0 * PI * kn);
        let v = prior.variances();
        assert!((v[2 + 2 * j] - expected).abs() <= 1e-14 * expected);
        assert_eq!(v[2 + 2 * j], v[3 + 2 * j]);
    }
    assert!((prior.std_devs()[2] - 2.5).abs() < 1e-12);
}

#[test]
fn shell_energy_matches_its_expectation() {
    let idx = FlowIndexSet::new(5.0).unwrap();
    let prior = KraichnanPrior::new(PriorParams::standard(), &idx).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(99);
    for shell in [1u32, 2, 5] {
        let expected = prior.expected_shell_energy(shell);
        let mean: f64 =
            (0..DRAWS).map(|_| prior.sample_field(&mut rng).shell_energy(shell)).sum::<f64>() / DRAWS as f64;
        assert!((mean - expected).abs() <= 0.05 * expected, "shell {shell}: {mean} vs {expected}");
    }
}

#[test]
fn samples_are_real_divergence_free_fields() {
    let idx = FlowIndexSet::new(3.0).unwrap();
    let prior = KraichnanPrior::new(PriorParams::standard(), &idx).unwrap();
    let f = prior.sample_field(&mut ChaCha20Rng::seed_from_u64(5));
    for x in [[0.1, 0.2], [0.77, 0.4]] {
        let c = f.evaluate_complex(x);
        assert!(c[0].im.abs() < 1e-12 && c[1].im.abs() < 1e-12);
    }
    // coefficients are parallel to k⊥, so k·v̂_k = 0
    for (k, _) in f.modes() {
        let [cx, cy] = f.coefficient(k);
        assert!((k.kx as f64 * cx + k.ky as f64 * cy).norm() < 1e-12);
    }
    assert_eq!(f.mode(WaveVector::ZERO).norm(), 0.0);
}

#[test]
fn mean_flow_variance_is_honoured() {
    let idx = FlowIndexSet::new(1.0).unwrap();
    let params = PriorParams { mean_flow_var: 4.0, ..PriorParams::standard() };
    let prior = KraichnanPrior::new(params, &idx).unwrap();
    assert_eq!(&prior.std_devs()[..2], &[2.0, 2.0]);
    assert!(KraichnanPrior::new(PriorParams { mean_flow_var: -1.0, ..params }, &idx).is_err());
}
