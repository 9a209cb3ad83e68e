use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shot_alloc::kernel::KernelMatrix;
use shot_alloc::measurement::{
    assemble_estimate, estimate_entry, estimator_variance, simulate_shots, smoothed_estimate,
    MeasurementLedger, NoiseModel,
};

fn two_point(k: f64) -> KernelMatrix<f64> {
    KernelMatrix::from_fn(2, |i, j| if i == j { 1.0 } else { k })
}

fn sample_stats(k: f64, shots: u64, sigma: f64, trials: usize, seed: u64) -> (f64, f64) {
    let kernel = two_point(k);
    let mut noise = NoiseModel::uniform(2, sigma).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<f64> = (0..trials)
        .map(|_| {
            noise.start_trial();
            simulate_shots(&kernel, &mut noise, 0, 1, shots, &mut rng).unwrap() as f64
                / shots as f64
        })
        .collect();
    let mean = xs.iter().sum::<f64>() / trials as f64;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (trials - 1) as f64;
    (mean, var)
}

#[test]
fn estimator_is_unbiased_with_the_stated_variance() {
    for (k, shots, sigma) in [
        (0.5, 4, 0.0),
        (0.1, 25, 0.0),
        (0.7, 8, 0.03),
        (0.4, 50, 0.08),
    ] {
        let trials = 40_000;
        let (mean, var) = sample_stats(k, shots, sigma, trials, 9);
        let expect = estimator_variance(k, shots, sigma).unwrap();
        assert!(
            (var - expect).abs() / expect < 0.05,
            "K={k} N={shots} sigma={sigma}: {var} vs {expect}"
        );
        assert!((mean - k).abs() < 4.0 * (var / trials as f64).sqrt());
    }
}

#[test]
fn offsets_persist_within_a_trial() {
    // With a huge shot count the estimate sits on K + offset, so two batches
    // in the same trial agree and batches in different trials do not.
    let kernel = two_point(0.5);
    let mut noise = NoiseModel::uniform(2, 0.1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let m = 4_000_000;
    let a = simulate_shots(&kernel, &mut noise, 0, 1, m, &mut rng).unwrap() as f64 / m as f64;
    let b = simulate_shots(&kernel, &mut noise, 0, 1, m, &mut rng).unwrap() as f64 / m as f64;
    assert!((a - b).abs() < 2e-3);
    noise.start_trial();
    let c = simulate_shots(&kernel, &mut noise, 0, 1, m, &mut rng).unwrap() as f64 / m as f64;
    assert!(
        (a - c).abs() > 2e-3,
        "fresh offsets should differ ({a} vs {c})"
    );
}

#[test]
fn boundary_entries_are_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut noise = NoiseModel::noiseless(2);
    assert_eq!(
        simulate_shots(&two_point(0.0), &mut noise, 0, 1, 100, &mut rng).unwrap(),
        0
    );
    assert_eq!(
        simulate_shots(&two_point(1.0), &mut noise, 0, 1, 100, &mut rng).unwrap(),
        100
    );
}

proptest! {
    #[test]
    fn ledger_estimates_stay_in_range(
        n in 2usize..8,
        shots in proptest::collection::vec(1u64..40, 28),
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kernel = KernelMatrix::from_fn(n, |i, j| if i == j { 1.0 } else { 0.5 / (1.0 + (i + j) as f64) });
        let mut noise = NoiseModel::uniform(n, 0.05).unwrap();
        let mut ledger = MeasurementLedger::new(n);
        let mut total = 0;
        let mut k = 0;
        for i in 0..n {
            for j in i + 1..n {
                let m = shots[k % shots.len()];
                k += 1;
                let s = simulate_shots(&kernel, &mut noise, i, j, m, &mut rng).unwrap();
                prop_assert!(s <= m);
                ledger.record(i, j, s, m).unwrap();
                total += m;
            }
        }
        prop_assert_eq!(ledger.total_shots(), total);
        let est: KernelMatrix<f64> = assemble_estimate(&ledger).unwrap();
        for i in 0..n {
            prop_assert_eq!(est.get(i, i), 1.0);
            for j in i + 1..n {
                let e: f64 = estimate_entry(&ledger, i, j).unwrap();
                let sm: f64 = smoothed_estimate(&ledger, i, j).unwrap();
                prop_assert!((0.0..=1.0).contains(&e));
                prop_assert!(sm > 0.0 && sm < 1.0);
                prop_assert_eq!(est.get(i, j), est.get(j, i));
                prop_assert_eq!(est.get(i, j), e);
            }
        }
    }

    #[test]
    fn variance_shrinks_with_shots_to_the_floor(k in 0.0f64..=1.0, sigma in 0.0f64..0.2, n in 1u64..1000) {
        let v = estimator_variance(k, n, sigma).unwrap();
        let more = estimator_variance(k, n + 1, sigma).unwrap();
        prop_assert!(v >= sigma * sigma * (1.0 - 1.0 / n as f64) - 1e-15);
        if k * (1.0 - k) > sigma * sigma {
            prop_assert!(more < v);
        }
    }
}
