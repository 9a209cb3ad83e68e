//! The shot-based measurement process and the kernel estimator built on it.
//!
//! Each shot on entry `(i, j)` is a Bernoulli draw whose success probability
//! is the effective kernel value `K_ij + e_ij`. The offset `e_ij` is drawn once
//! per trial from `N(0, sigma_ij^2)` and then reused by every shot on that
//! entry, so distinct shots share covariance `sigma_ij^2`. The effective value
//! is clamped to `[0, 1]`; the clamp biases the estimator when `K_ij` is within
//! a few `sigma_ij` of either bound.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Normal};

use crate::error::{Error, Result};
use crate::kernel::KernelMatrix;
use crate::tri::{num_pairs, pair_offset, pairs, UpperTri};
use crate::Scalar;

fn check_pair(n: usize, i: usize, j: usize) -> Result<usize> {
    if i < j && j < n {
        Ok(pair_offset(n, i, j))
    } else {
        Err(Error::InvalidPair { i, j, n })
    }
}

/// Sufficient statistics of the measurement record: successes `S_ij` and
/// shots `N_ij` for every independent entry `i < j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MeasurementLedger {
    n: usize,
    successes: Vec<u64>,
    shots: Vec<u64>,
}

impl MeasurementLedger {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            successes: vec![0; num_pairs(n)],
            shots: vec![0; num_pairs(n)],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_pairs(&self) -> usize {
        self.shots.len()
    }

    /// Adds `shots` measurements with `successes` ones to entry `(i, j)`.
    pub fn record(&mut self, i: usize, j: usize, successes: u64, shots: u64) -> Result<()> {
        let k = check_pair(self.n, i, j)?;
        if successes > shots {
            return Err(Error::Domain(format!(
                "{successes} successes out of {shots} shots"
            )));
        }
        self.successes[k] += successes;
        self.shots[k] += shots;
        Ok(())
    }

    pub fn successes(&self, i: usize, j: usize) -> Result<u64> {
        Ok(self.successes[check_pair(self.n, i, j)?])
    }

    pub fn shots(&self, i: usize, j: usize) -> Result<u64> {
        Ok(self.shots[check_pair(self.n, i, j)?])
    }

    pub fn total_shots(&self) -> u64 {
        self.shots.iter().sum()
    }

    pub fn min_shots(&self) -> u64 {
        self.shots.iter().copied().min().unwrap_or(0)
    }

    /// `((i, j), S_ij, N_ij)` in storage order.
    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), u64, u64)> + '_ {
        pairs(self.n)
            .zip(self.successes.iter().zip(&self.shots))
            .map(|(p, (&s, &m))| (p, s, m))
    }

    pub fn shot_counts(&self) -> UpperTri<u64> {
        UpperTri::from_vec(self.n, self.shots.clone())
    }
}

/// Correlated hardware noise: per-entry standard deviation plus the offsets
/// realized in the current trial.
#[derive(Clone, Debug)]
pub struct NoiseModel<T> {
    sigma: UpperTri<T>,
    offsets: Vec<Option<f64>>,
}

impl<T: Scalar> NoiseModel<T> {
    /// Pure Bernoulli sampling.
    pub fn noiseless(n: usize) -> Self {
        Self::uniform(n, T::zero()).expect("zero sigma is valid")
    }

    pub fn uniform(n: usize, sigma_phys: T) -> Result<Self> {
        Self::per_entry(UpperTri::filled(n, sigma_phys))
    }

    pub fn per_entry(sigma: UpperTri<T>) -> Result<Self> {
        if let Some(((i, j), s)) = sigma.iter().find(|(_, s)| !(**s >= T::zero())) {
            return Err(Error::Domain(format!(
                "sigma_phys[{i},{j}] = {s} is negative"
            )));
        }
        let offsets = vec![None; sigma.len()];
        Ok(Self { sigma, offsets })
    }

    pub fn n(&self) -> usize {
        self.sigma.n()
    }

    pub fn sigma(&self) -> &UpperTri<T> {
        &self.sigma
    }

    pub fn is_noiseless(&self) -> bool {
        self.sigma.values().iter().all(|s| *s == T::zero())
    }

    /// Forgets every realized offset; the next shot on each entry draws anew.
    pub fn start_trial(&mut self) {
        self.offsets.iter_mut().for_each(|o| *o = None);
    }

    /// A copy of this model with no offsets realized yet.
    pub fn fresh(&self) -> Self {
        let mut copy = self.clone();
        copy.start_trial();
        copy
    }

    /// The persistent offset of entry `(i, j)` in this trial, sampled on
    /// first use. Entries with zero sigma never touch the random stream.
    pub fn offset<R: Rng + ?Sized>(&mut self, i: usize, j: usize, rng: &mut R) -> Result<f64> {
        let k = check_pair(self.n(), i, j)?;
        let sigma = self.sigma.values()[k].as_f64();
        if sigma == 0.0 {
            return Ok(0.0);
        }
        Ok(*self.offsets[k].get_or_insert_with(|| {
            Normal::new(0.0, sigma)
                .expect("finite nonnegative sigma")
                .sample(rng)
        }))
    }
}

/// Runs `m` shots on entry `(i, j)` and returns the number of successes.
pub fn simulate_shots<T: Scalar, R: Rng + ?Sized>(
    k_true: &KernelMatrix<T>,
    noise: &mut NoiseModel<T>,
    i: usize,
    j: usize,
    m: u64,
    rng: &mut R,
) -> Result<u64> {
    check_pair(k_true.n(), i, j)?;
    if noise.n() != k_true.n() {
        return Err(Error::DimensionMismatch {
            expected: k_true.n(),
            got: noise.n(),
        });
    }
    if m == 0 {
        return Ok(0);
    }
    let offset = noise.offset(i, j, rng)?;
    let p = (k_true.get(i, j).as_f64() + offset).clamp(0.0, 1.0);
    let draw = Binomial::new(m, p).map_err(|e| Error::Domain(e.to_string()))?;
    Ok(draw.sample(rng))
}

/// `S_ij / N_ij`.
pub fn estimate_entry<T: Scalar>(ledger: &MeasurementLedger, i: usize, j: usize) -> Result<T> {
    let m = ledger.shots(i, j)?;
    if m == 0 {
        return Err(Error::NoData { i, j });
    }
    Ok(T::from_count(ledger.successes(i, j)?) / T::from_count(m))
}

/// Laplace-smoothed estimate `(S_ij + 1) / (N_ij + 2)`, always strictly
/// inside `(0, 1)`.
pub fn smoothed_estimate<T: Scalar>(ledger: &MeasurementLedger, i: usize, j: usize) -> Result<T> {
    let s = ledger.successes(i, j)?;
    let m = ledger.shots(i, j)?;
    Ok(T::from_count(s + 1) / T::from_count(m + 2))
}

/// Variance of `S/N` under the correlated-noise model:
/// `K(1-K)/N + (1 - 1/N) sigma_phys^2`.
pub fn estimator_variance<T: Scalar>(k: T, shots: u64, sigma_phys: T) -> Result<T> {
    if shots == 0 {
        return Err(Error::Domain(
            "estimator variance needs at least one shot".into(),
        ));
    }
    if !(k >= T::zero() && k <= T::one()) || !(sigma_phys >= T::zero()) {
        return Err(Error::Domain(format!(
            "K = {k}, sigma_phys = {sigma_phys} out of range"
        )));
    }
    let m = T::from_count(shots);
    Ok(k * (T::one() - k) / m + (T::one() - m.recip()) * sigma_phys * sigma_phys)
}

/// Symmetric estimate with unit diagonal built from the ledger.
pub fn assemble_estimate<T: Scalar>(ledger: &MeasurementLedger) -> Result<KernelMatrix<T>> {
    let missing: Vec<(usize, usize)> = ledger
        .iter()
        .filter(|(_, _, m)| *m == 0)
        .map(|(p, _, _)| p)
        .collect();
    if !missing.is_empty() {
        return Err(Error::IncompleteLedger { missing });
    }
    let mut k = KernelMatrix::identity(ledger.n());
    for ((i, j), s, m) in ledger.iter() {
        k.set_symmetric(i, j, T::from_count(s) / T::from_count(m));
    }
    Ok(k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop_assert, prop_assert_eq, proptest};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_point(k12: f64) -> KernelMatrix<f64> {
        KernelMatrix::from_rows(vec![vec![1.0, k12], vec![k12, 1.0]]).unwrap()
    }

    #[test]
    fn deterministic_bernoulli_endpoints() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut noise = NoiseModel::noiseless(2);
        assert_eq!(
            simulate_shots(&two_point(1.0), &mut noise, 0, 1, 100, &mut rng).unwrap(),
            100
        );
        assert_eq!(
            simulate_shots(&two_point(0.0), &mut noise, 0, 1, 100, &mut rng).unwrap(),
            0
        );
    }

    #[test]
    fn half_probability_concentrates() {
        // 0.01 is 6.3 binomial standard deviations at m = 1e5
        let k = two_point(0.5);
        let mut noise = NoiseModel::noiseless(2);
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = simulate_shots(&k, &mut noise, 0, 1, 100_000, &mut rng).unwrap();
            let frac = s as f64 / 1e5;
            assert!((0.49..=0.51).contains(&frac), "{frac}");
        }
    }

    #[test]
    fn shots_are_reproducible() {
        let k = two_point(0.37);
        let mut a = NoiseModel::uniform(2, 0.05).unwrap();
        let mut b = a.fresh();
        let mut ra = ChaCha8Rng::seed_from_u64(9);
        let mut rb = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            assert_eq!(
                simulate_shots(&k, &mut a, 0, 1, 50, &mut ra).unwrap(),
                simulate_shots(&k, &mut b, 0, 1, 50, &mut rb).unwrap()
            );
        }
    }

    #[test]
    fn offset_is_persistent_within_a_trial() {
        let mut noise = NoiseModel::<f64>::uniform(3, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let first = noise.offset(0, 2, &mut rng).unwrap();
        assert_eq!(noise.offset(0, 2, &mut rng).unwrap(), first);
        noise.start_trial();
        assert_ne!(noise.offset(0, 2, &mut rng).unwrap(), first);
    }

    #[test]
    fn invalid_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut noise = NoiseModel::noiseless(3);
        let k = KernelMatrix::<f64>::identity(3);
        assert!(matches!(
            simulate_shots(&k, &mut noise, 1, 1, 5, &mut rng),
            Err(Error::InvalidPair { .. })
        ));
        assert!(simulate_shots(&k, &mut noise, 2, 1, 5, &mut rng).is_err());
        assert!(simulate_shots(&k, &mut noise, 1, 3, 5, &mut rng).is_err());
        assert!(NoiseModel::<f64>::uniform(3, -0.1).is_err());
    }

    #[test]
    fn estimators() {
        let mut ledger = MeasurementLedger::new(4);
        ledger.record(0, 1, 3, 10).unwrap();
        ledger.record(0, 2, 0, 5).unwrap();
        ledger.record(0, 3, 7, 7).unwrap();
        ledger.record(1, 2, 10, 10).unwrap();
        ledger.record(1, 3, 5, 10).unwrap();
        assert_eq!(estimate_entry::<f64>(&ledger, 0, 1).unwrap(), 0.3);
        assert_eq!(estimate_entry::<f64>(&ledger, 0, 2).unwrap(), 0.0);
        assert_eq!(estimate_entry::<f64>(&ledger, 0, 3).unwrap(), 1.0);
        assert!(matches!(
            estimate_entry::<f64>(&ledger, 2, 3),
            Err(Error::NoData { i: 2, j: 3 })
        ));

        assert_eq!(smoothed_estimate::<f64>(&ledger, 2, 3).unwrap(), 0.5);
        assert!((smoothed_estimate::<f64>(&ledger, 1, 2).unwrap() - 11.0 / 12.0).abs() < 1e-15);
        assert_eq!(smoothed_estimate::<f64>(&ledger, 1, 3).unwrap(), 0.5);

        assert!(ledger.record(2, 3, 4, 3).is_err());
        assert_eq!(ledger.total_shots(), 42);
    }

    #[test]
    fn variance_law_values() {
        assert!((estimator_variance::<f64>(0.5, 10, 0.0).unwrap() - 0.025).abs() < 1e-15);
        assert!((estimator_variance::<f64>(0.3, 10, 0.05).unwrap() - 0.02325).abs() < 1e-15);
        assert_eq!(estimator_variance(0.0, 1_000_000, 0.0).unwrap(), 0.0);
        assert_eq!(estimator_variance(1.0, 1_000_000, 0.0).unwrap(), 0.0);
        assert!(estimator_variance(0.5, 0, 0.0).is_err());
    }

    #[test]
    fn assemble() {
        let mut ledger = MeasurementLedger::new(2);
        assert!(matches!(
            assemble_estimate::<f64>(&ledger),
            Err(Error::IncompleteLedger { ref missing }) if missing == &[(0, 1)]
        ));
        ledger.record(0, 1, 1, 2).unwrap();
        assert_eq!(assemble_estimate::<f64>(&ledger).unwrap(), two_point(0.5));

        let mut full = MeasurementLedger::new(5);
        for (i, j) in pairs(5) {
            full.record(i, j, 4, 4).unwrap();
        }
        let k: KernelMatrix<f32> = assemble_estimate(&full).unwrap();
        assert!((0..5).all(|i| (0..5).all(|j| k.get(i, j) == 1.0)));
    }

    proptest! {
        #[test]
        fn smoothed_estimate_strictly_inside_unit_interval(s in 0u64..1000, extra in 0u64..1000) {
            let mut ledger = MeasurementLedger::new(2);
            ledger.record(0, 1, s, s + extra).unwrap();
            let p: f64 = smoothed_estimate(&ledger, 0, 1).unwrap();
            prop_assert!(p > 0.0 && p < 1.0);
        }

        #[test]
        fn assembled_estimate_is_symmetric(n in 2usize..9, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut ledger = MeasurementLedger::new(n);
            for (i, j) in pairs(n) {
                let m = rng.random_range(1..50u64);
                ledger.record(i, j, rng.random_range(0..=m), m).unwrap();
            }
            let k: KernelMatrix<f64> = assemble_estimate(&ledger).unwrap();
            for i in 0..n {
                prop_assert_eq!(k.get(i, i), 1.0);
                for j in 0..n {
                    prop_assert_eq!(k.get(i, j), k.get(j, i));
                    prop_assert!((0.0..=1.0).contains(&k.get(i, j)));
                }
            }
        }
    }
}
