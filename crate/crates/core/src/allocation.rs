//! Shot allocations and the variance objective `V = sum_ij w_ij / N_ij`.

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::kernel::KernelMatrix;
use crate::svm::SvmModel;
use crate::tri::{num_pairs, UpperTri};
use crate::Scalar;

/// Shot counts per independent entry and the budget they exhaust.
/// Realizable allocations use `u64`; fractional ones use a float.
#[derive(Clone, Debug, PartialEq)]
pub struct Allocation<V> {
    counts: UpperTri<V>,
    budget: V,
}

impl<V: Copy> Allocation<V> {
    pub fn counts(&self) -> &UpperTri<V> {
        &self.counts
    }

    pub fn budget(&self) -> V {
        self.budget
    }

    pub fn get(&self, i: usize, j: usize) -> V {
        *self.counts.get(i, j)
    }
}

impl Allocation<u64> {
    /// Wraps integer counts; the budget is their sum.
    pub fn from_counts(counts: UpperTri<u64>) -> Self {
        let budget = counts.values().iter().sum();
        Self { counts, budget }
    }

    pub fn to_real<T: Scalar>(&self) -> Allocation<T> {
        Allocation {
            counts: self.counts.map(|&c| T::from_count(c)),
            budget: T::from_count(self.budget),
        }
    }
}

impl<T: Scalar> Allocation<T> {
    pub fn from_fractional(counts: UpperTri<T>) -> Self {
        let budget = counts.values().iter().copied().sum();
        Self { counts, budget }
    }
}

/// `floor(N_tot / M)` shots per pair, the remainder spread one shot each over
/// pairs drawn without replacement from `rng`.
pub fn uniform_allocation<R: Rng + ?Sized>(
    n: usize,
    n_tot: u64,
    rng: &mut R,
) -> Result<Allocation<u64>> {
    let m = num_pairs(n);
    if m == 0 || n_tot < m as u64 {
        return Err(Error::InsufficientBudget {
            budget: n_tot,
            pairs: m,
        });
    }
    let base = n_tot / m as u64;
    let extra = (n_tot % m as u64) as usize;
    let mut counts = vec![base; m];
    if extra > 0 {
        for k in sample(rng, m, extra) {
            counts[k] += 1;
        }
    }
    Ok(Allocation {
        counts: UpperTri::from_vec(n, counts),
        budget: n_tot,
    })
}

/// `N_tot / M` on every pair.
pub fn uniform_fractional<T: Scalar>(n: usize, n_tot: T) -> Allocation<T> {
    let share = n_tot / T::lit(num_pairs(n) as f64);
    Allocation {
        counts: UpperTri::filled(n, share),
        budget: n_tot,
    }
}

/// The square-root rule `N*_ij = N_tot sqrt(w_ij) / sum sqrt(w)`.
pub fn oracle_allocation<T: Scalar>(weights: &UpperTri<T>, n_tot: T) -> Result<Allocation<T>> {
    check_weights(weights)?;
    let roots = weights.map(|&w| w.sqrt());
    let total: T = roots.values().iter().copied().sum();
    if !(total > T::zero()) {
        return Err(Error::DegenerateWeights);
    }
    Ok(Allocation {
        counts: roots.map(|&r| n_tot * r / total),
        budget: n_tot,
    })
}

fn check_weights<T: Scalar>(weights: &UpperTri<T>) -> Result<()> {
    match weights
        .iter()
        .find(|(_, w)| !(**w >= T::zero()) || !w.is_finite())
    {
        Some(((i, j), w)) => Err(Error::Domain(format!("weight w[{i},{j}] = {w}"))),
        None => Ok(()),
    }
}

/// `sum over w_ij > 0 of w_ij / N_ij`.
pub fn sampling_variance<T: Scalar>(weights: &UpperTri<T>, alloc: &Allocation<T>) -> Result<T> {
    if weights.n() != alloc.counts.n() {
        return Err(Error::DimensionMismatch {
            expected: weights.n(),
            got: alloc.counts.n(),
        });
    }
    let mut v = T::zero();
    for (((i, j), &w), &m) in weights.iter().zip(alloc.counts.values()) {
        if w > T::zero() {
            if !(m > T::zero()) {
                return Err(Error::InfiniteVariance { i, j });
            }
            v = v + w / m;
        }
    }
    Ok(v)
}

/// Margin-variance weights `(a_i a_j)^2 K_ij (1 - K_ij)`.
pub fn margin_weights<T: Scalar>(model: &SvmModel<T>, k: &KernelMatrix<T>) -> UpperTri<T> {
    let a = model.alpha();
    UpperTri::from_fn(k.n(), |i, j| {
        let kij = k.get(i, j);
        let g = a[i] * a[j];
        g * g * kij * (T::one() - kij)
    })
}

/// Decision-variance weights `(a_i^2 + a_j^2) K_ij (1 - K_ij)`.
pub fn decision_weights<T: Scalar>(model: &SvmModel<T>, k: &KernelMatrix<T>) -> UpperTri<T> {
    let a = model.alpha();
    UpperTri::from_fn(k.n(), |i, j| {
        let kij = k.get(i, j);
        (a[i] * a[i] + a[j] * a[j]) * kij * (T::one() - kij)
    })
}

/// Draws `Multinomial(budget, scores / sum(scores))` as a chain of
/// conditional binomials, so the counts always sum to `budget`.
pub fn multinomial_draw<T: Scalar, R: Rng + ?Sized>(
    scores: &UpperTri<T>,
    budget: u64,
    rng: &mut R,
) -> Result<Allocation<u64>> {
    check_weights(scores)?;
    let q: Vec<f64> = scores.values().iter().map(|s| s.as_f64()).collect();
    let mut mass: f64 = q.iter().sum();
    if !(mass > 0.0) {
        return Err(Error::DegenerateScores);
    }
    let last = q.iter().rposition(|&s| s > 0.0).expect("positive mass");
    let mut left = budget;
    let mut counts = vec![0u64; q.len()];
    for (k, &s) in q.iter().enumerate().take(last) {
        if left == 0 {
            break;
        }
        if s > 0.0 {
            let p = (s / mass).clamp(0.0, 1.0);
            let draw = Binomial::new(left, p).map_err(|e| Error::Domain(e.to_string()))?;
            counts[k] = draw.sample(rng);
            left -= counts[k];
        }
        mass -= s;
    }
    counts[last] += left;
    Ok(Allocation {
        counts: UpperTri::from_vec(scores.n(), counts),
        budget,
    })
}

/// Rounds a fractional allocation to integers summing to `budget`: floors
/// first, then the largest remainders. Every positive-weight entry keeps at
/// least one shot so its variance stays finite.
pub fn round_allocation<T: Scalar>(
    weights: &UpperTri<T>,
    frac: &Allocation<T>,
    budget: u64,
) -> Result<Allocation<u64>> {
    if weights.n() != frac.counts.n() {
        return Err(Error::DimensionMismatch {
            expected: weights.n(),
            got: frac.counts.n(),
        });
    }
    let positive: Vec<bool> = weights.values().iter().map(|&w| w > T::zero()).collect();
    let required = positive.iter().filter(|&&p| p).count();
    if (budget as usize) < required {
        return Err(Error::InsufficientBudget {
            budget,
            pairs: required,
        });
    }
    let target: Vec<f64> = frac
        .counts
        .values()
        .iter()
        .map(|c| c.as_f64().max(0.0))
        .collect();
    let mut counts: Vec<u64> = target
        .iter()
        .zip(&positive)
        .map(|(&t, &p)| {
            let f = t.floor() as u64;
            if p {
                f.max(1)
            } else {
                f
            }
        })
        .collect();
    let assigned: u64 = counts.iter().sum();
    // Order by how far each entry sits below its target.
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = target[a] - counts[a] as f64;
        let rb = target[b] - counts[b] as f64;
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    if assigned < budget {
        let mut left = budget - assigned;
        // Prefer positive-weight entries; zero-weight ones only if nothing else exists.
        let eligible: Vec<usize> = match order
            .iter()
            .copied()
            .filter(|&k| positive[k])
            .collect::<Vec<_>>()
        {
            v if !v.is_empty() => v,
            _ => order.clone(),
        };
        while left > 0 {
            for &k in &eligible {
                if left == 0 {
                    break;
                }
                counts[k] += 1;
                left -= 1;
            }
        }
    } else {
        let mut excess = assigned - budget;
        while excess > 0 {
            let mut moved = false;
            for &k in order.iter().rev() {
                if excess == 0 {
                    break;
                }
                let floor = u64::from(positive[k]);
                if counts[k] > floor {
                    counts[k] -= 1;
                    excess -= 1;
                    moved = true;
                }
            }
            if !moved {
                break;
            }
        }
    }
    Ok(Allocation {
        counts: UpperTri::from_vec(weights.n(), counts),
        budget,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tri(v: &[f64]) -> UpperTri<f64> {
        // 2 pairs do not form a triangle, so host small vectors on n with
        // enough pairs and pad with zeros.
        let mut n = 2;
        while num_pairs(n) < v.len() {
            n += 1;
        }
        let mut data = v.to_vec();
        data.resize(num_pairs(n), 0.0);
        UpperTri::from_vec(n, data)
    }

    #[test]
    fn uniform_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = uniform_allocation(5, 100, &mut rng).unwrap();
        assert!(a.counts().values().iter().all(|&c| c == 10));
        let a = uniform_allocation(3, 4, &mut rng).unwrap();
        let mut c = a.counts().values().to_vec();
        c.sort_unstable();
        assert_eq!(c, vec![1, 1, 2]);
        assert!(matches!(
            uniform_allocation(3, 2, &mut rng),
            Err(Error::InsufficientBudget {
                budget: 2,
                pairs: 3
            })
        ));
    }

    #[test]
    fn oracle_examples() {
        let w = UpperTri::filled(3, 0.7f64);
        let a = oracle_allocation(&w, 99.0).unwrap();
        assert!(a
            .counts()
            .values()
            .iter()
            .all(|&c| (c - 33.0).abs() < 1e-12));

        let w = tri(&[4.0, 1.0]);
        let a = oracle_allocation(&w, 30.0).unwrap();
        assert!((a.counts().values()[0] - 20.0).abs() < 1e-12);
        assert!((a.counts().values()[1] - 10.0).abs() < 1e-12);
        assert_eq!(a.counts().values()[2], 0.0);
        assert!((sampling_variance(&w, &a).unwrap() - 0.3).abs() < 1e-12);

        let w = tri(&[1.0, 0.0]);
        let a = oracle_allocation(&w, 7.0).unwrap();
        assert_eq!(a.counts().values()[0], 7.0);

        assert!(matches!(
            oracle_allocation(&UpperTri::filled(3, 0.0), 5.0),
            Err(Error::DegenerateWeights)
        ));
    }

    #[test]
    fn variance_examples() {
        let w = tri(&[4.0, 1.0]);
        let unif = Allocation::from_fractional(tri(&[15.0, 15.0]));
        assert!((sampling_variance(&w, &unif).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        let doubled = Allocation::from_fractional(tri(&[30.0, 30.0]));
        assert!((sampling_variance(&w, &doubled).unwrap() - 1.0 / 6.0).abs() < 1e-12);
        let starved = Allocation::from_fractional(tri(&[15.0, 0.0]));
        assert!(matches!(
            sampling_variance(&w, &starved),
            Err(Error::InfiniteVariance { i: 0, j: 2 })
        ));
    }

    #[test]
    fn weight_examples() {
        let k = KernelMatrix::<f64>::from_rows(vec![vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let m = SvmModel::from_parts(vec![1.0, 1.0], vec![1, -1], 0.0, 2.0, &k).unwrap();
        assert!((margin_weights(&m, &k).get(0, 1) - 0.25).abs() < 1e-15);
        let m = SvmModel::from_parts(vec![1.0, 0.0], vec![1, -1], 0.0, 2.0, &k).unwrap();
        assert!((decision_weights(&m, &k).get(0, 1) - 0.25).abs() < 1e-15);
        assert_eq!(*margin_weights(&m, &k).get(0, 1), 0.0);

        let k = KernelMatrix::<f64>::identity(3);
        let m = SvmModel::from_parts(vec![1.0, 1.0, 1.0], vec![1, -1, 1], 0.0, 2.0, &k).unwrap();
        assert!(margin_weights(&m, &k).values().iter().all(|&w| w == 0.0));
    }

    #[test]
    fn multinomial_point_mass_and_empty_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = tri(&[0.0, 2.0, 0.0]);
        let a = multinomial_draw(&s, 17, &mut rng).unwrap();
        assert_eq!(a.counts().values(), &[0, 17, 0]);
        let a = multinomial_draw(&UpperTri::filled(3, 1.0), 0, &mut rng).unwrap();
        assert!(a.counts().values().iter().all(|&c| c == 0));
        assert!(matches!(
            multinomial_draw(&UpperTri::filled(3, 0.0), 5, &mut rng),
            Err(Error::DegenerateScores)
        ));
    }

    #[test]
    fn multinomial_balanced_halves() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = UpperTri::from_vec(2, vec![0.5]);
        let s3 = tri(&[0.5, 0.5]);
        let a = multinomial_draw(&s3, 100_000, &mut rng).unwrap();
        let c = a.counts().values();
        assert_eq!(c[0] + c[1], 100_000);
        assert!((c[0] as i64 - 50_000).abs() < 700, "{c:?}");
        assert_eq!(multinomial_draw(&s, 9, &mut rng).unwrap().get(0, 1), 9);
    }

    #[test]
    fn rounding_keeps_budget_and_floor() {
        let w = tri(&[4.0, 1.0, 1e-6]);
        let frac = oracle_allocation(&w, 10.0).unwrap();
        let r = round_allocation(&w, &frac, 10).unwrap();
        let c = r.counts().values();
        assert_eq!(c.iter().sum::<u64>(), 10);
        assert!(c[2] >= 1);
        assert!(c[0] > c[1]);

        let w = UpperTri::filled(4, 1.0);
        let frac = oracle_allocation(&w, 20.0).unwrap();
        let r = round_allocation(&w, &frac, 20).unwrap();
        assert_eq!(r.counts().values().iter().sum::<u64>(), 20);
        assert!(r.counts().values().iter().all(|&c| c == 3 || c == 4));
        assert!(round_allocation(&w, &frac, 5).is_err());
    }
}
