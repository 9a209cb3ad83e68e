use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shot_alloc::kernel::KernelMatrix;
use shot_alloc::svm::{
    brute_force_dual, decision_values, dual_objective, kkt_violation, margin_norm, train,
    SolverOptions,
};
use shot_alloc::synthetic::rbf_kernel;
use shot_alloc::Label;

fn instance(seed: u64, n: usize) -> (KernelMatrix<f64>, Vec<Label>, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<Vec<f64>> = (0..n)
        .map(|_| vec![rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)])
        .collect();
    let k = rbf_kernel(&points, rng.random_range(0.2..3.0)).unwrap();
    let labels: Vec<Label> = (0..n).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
    (k, labels, rng.random_range(0.05..20.0))
}

#[test]
fn smo_reaches_the_exhaustive_optimum() {
    for seed in 0..150 {
        let n = 2 + (seed as usize % 5);
        let (k, y, c) = instance(1000 + seed, n);
        let smo = train(&k, &y, c, SolverOptions::with_tol(1e-11)).unwrap();
        let exact = brute_force_dual(&k, &y, c, 1e-9).unwrap();
        let a = dual_objective(smo.alpha(), &y, &k);
        let b = dual_objective(&exact, &y, &k);
        assert!((a - b).abs() < 1e-7, "seed {seed}: {a} vs {b}");
    }
}

#[test]
fn two_orthogonal_points() {
    let k = KernelMatrix::<f64>::identity(2);
    let m = train(&k, &[1, -1], 5.0, SolverOptions::with_tol(1e-12)).unwrap();
    assert!((m.alpha()[0] - 1.0).abs() < 1e-10 && (m.alpha()[1] - 1.0).abs() < 1e-10);
    assert!(m.bias().abs() < 1e-10);
    assert!((margin_norm(&m, &k) - 2f64.sqrt()).abs() < 1e-10);
    assert_eq!(decision_values(&m, &k).unwrap(), vec![1.0, -1.0]);
    // a tight box binds both coefficients
    let m = train(&k, &[1, -1], 0.25, SolverOptions::with_tol(1e-12)).unwrap();
    assert_eq!(m.alpha(), &[0.25, 0.25]);
    assert!(m.free().is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn solutions_are_feasible_and_kkt(seed in any::<u64>(), n in 3usize..20) {
        let (k, y, c) = instance(seed, n);
        let m = train(&k, &y, c, SolverOptions::with_tol(1e-9)).unwrap();
        let balance: f64 = m.alpha().iter().zip(&y).map(|(a, &l)| a * f64::from(l)).sum();
        prop_assert!(balance.abs() < 1e-9 * c.max(1.0) * n as f64);
        prop_assert!(m.alpha().iter().all(|&a| (0.0..=c).contains(&a)));
        prop_assert!(kkt_violation(&m, &k).unwrap() < 1e-6);
    }

    #[test]
    fn relabeling_points_permutes_the_solution(seed in any::<u64>(), n in 3usize..12, shift in 1usize..11) {
        let (k, y, c) = instance(seed, n);
        let perm: Vec<usize> = (0..n).map(|i| (i + shift) % n).collect();
        let kp = KernelMatrix::from_fn(n, |i, j| k.get(perm[i], perm[j]));
        let yp: Vec<Label> = perm.iter().map(|&p| y[p]).collect();
        let opts = SolverOptions::with_tol(1e-11);
        let a = train(&k, &y, c, opts).unwrap();
        let b = train(&kp, &yp, c, opts).unwrap();
        let oa = dual_objective(a.alpha(), &y, &k);
        let ob = dual_objective(b.alpha(), &yp, &kp);
        prop_assert!((oa - ob).abs() < 1e-8);
        let fa = decision_values(&a, &k).unwrap();
        let fb = decision_values(&b, &kp).unwrap();
        for i in 0..n {
            prop_assert!((fb[i] - fa[perm[i]]).abs() < 1e-4);
        }
    }

    #[test]
    fn flipping_all_labels_negates_the_classifier(seed in any::<u64>(), n in 3usize..12) {
        let (k, y, c) = instance(seed, n);
        let neg: Vec<Label> = y.iter().map(|&l| -l).collect();
        let opts = SolverOptions::with_tol(1e-11);
        let a = train(&k, &y, c, opts).unwrap();
        let b = train(&k, &neg, c, opts).unwrap();
        let fa = decision_values(&a, &k).unwrap();
        let fb = decision_values(&b, &k).unwrap();
        for i in 0..n {
            prop_assert!((fa[i] + fb[i]).abs() < 1e-4);
        }
    }
}
