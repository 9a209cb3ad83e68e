use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shot_alloc::kernel::KernelMatrix;
use shot_alloc::metrics::{gini, jaccard, weighted_jaccard, Reference};
use shot_alloc::svm::{train, SolverOptions};
use shot_alloc::synthetic::{default_gamma, make_blobs, rbf_kernel, BlobSpec};

fn permute(k: &KernelMatrix<f64>, p: &[usize]) -> KernelMatrix<f64> {
    KernelMatrix::from_fn(k.n(), |i, j| k.get(p[i], p[j]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn metrics_ignore_the_order_of_points(seed in any::<u64>(), shift in 1usize..19) {
        let data = make_blobs::<f64>(&BlobSpec { n_points: 20, separation: 3.0, seed, ..BlobSpec::default() }).unwrap();
        let k = rbf_kernel(&data.points, default_gamma(&data.points).unwrap()).unwrap();
        // a bandwidth perturbation keeps the estimate positive definite, so
        // both duals have a unique optimum
        let gamma = default_gamma(&data.points).unwrap();
        let bump = ChaCha8Rng::seed_from_u64(seed).random_range(0.7..1.3);
        let k_hat = rbf_kernel(&data.points, gamma * bump).unwrap();
        let opts = SolverOptions::with_tol(1e-11);
        let y = &data.labels;
        let reference = Reference::new(k.clone(), train(&k, y, 1.0, opts).unwrap()).unwrap();
        let a = reference.compare(&k_hat, &train(&k_hat, y, 1.0, opts).unwrap()).unwrap();

        let p: Vec<usize> = (0..20).map(|i| (i + shift) % 20).collect();
        let yp: Vec<_> = p.iter().map(|&i| y[i]).collect();
        let (kp, khp) = (permute(&k, &p), permute(&k_hat, &p));
        let rp = Reference::new(kp.clone(), train(&kp, &yp, 1.0, opts).unwrap()).unwrap();
        let b = rp.compare(&khp, &train(&khp, &yp, 1.0, opts).unwrap()).unwrap();

        prop_assert!((a.rmse_k - b.rmse_k).abs() < 1e-12);
        prop_assert!((a.rmse_k_sv - b.rmse_k_sv).abs() < 1e-12);
        prop_assert!((a.jaccard - b.jaccard).abs() < 1e-12, "{} vs {}", a.jaccard, b.jaccard);
        prop_assert!((a.weighted_jaccard - b.weighted_jaccard).abs() < 1e-5);
        prop_assert!((a.rel_margin_err - b.rel_margin_err).abs() < 1e-5);
        prop_assert!((a.rmse_f_normalized - b.rmse_f_normalized).abs() < 1e-5);
    }

    #[test]
    fn set_overlaps_are_symmetric_and_bounded(
        a in proptest::collection::vec(0usize..30, 0..20),
        b in proptest::collection::vec(0usize..30, 0..20),
    ) {
        let j: f64 = jaccard(&a, &b);
        prop_assert_eq!(j, jaccard(&b, &a));
        prop_assert!((0.0..=1.0).contains(&j));
    }

    #[test]
    fn weighted_overlap_is_symmetric_and_bounded(
        a in proptest::collection::vec(0.0f64..2.0, 1..30),
        scale in 0.0f64..2.0,
    ) {
        let b: Vec<f64> = a.iter().rev().map(|x| x * scale).collect();
        let w = weighted_jaccard(&a, &b).unwrap();
        prop_assert!((w - weighted_jaccard(&b, &a).unwrap()).abs() < 1e-15);
        prop_assert!((0.0..=1.0).contains(&w));
        prop_assert_eq!(weighted_jaccard(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn gini_is_scale_free_and_below_one(a in proptest::collection::vec(0.0f64..5.0, 1..40), c in 0.1f64..10.0) {
        prop_assume!(a.iter().sum::<f64>() > 0.0);
        let g = gini(&a).unwrap();
        let scaled: Vec<f64> = a.iter().map(|x| x * c).collect();
        prop_assert!((0.0..1.0).contains(&g));
        prop_assert!((g - gini(&scaled).unwrap()).abs() < 1e-12);
    }
}
