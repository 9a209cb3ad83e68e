//! Comparison of a noisy-kernel model against the model trained on the true
//! kernel.

use crate::error::{Error, Result};
use crate::kernel::KernelMatrix;
use crate::svm::{decision_values, margin_norm, SvmModel};
use crate::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricBundle<T> {
    pub rmse_k: T,
    pub rmse_k_sv: T,
    pub jaccard: T,
    pub weighted_jaccard: T,
    pub rel_margin_err: T,
    pub rmse_f_normalized: T,
}

/// RMSE over all `n^2` positions, or over `subset x subset` when given.
pub fn kernel_rmse<T: Scalar>(
    k_true: &KernelMatrix<T>,
    k_hat: &KernelMatrix<T>,
    subset: Option<&[usize]>,
) -> Result<T> {
    if k_true.n() != k_hat.n() {
        return Err(Error::DimensionMismatch {
            expected: k_true.n(),
            got: k_hat.n(),
        });
    }
    let all: Vec<usize>;
    let idx = match subset {
        Some([]) => return Err(Error::EmptySubset),
        Some(s) => s,
        None => {
            all = (0..k_true.n()).collect();
            &all
        }
    };
    let mut sum = T::zero();
    for &i in idx {
        for &j in idx {
            let d = k_true.get(i, j) - k_hat.get(i, j);
            sum = sum + d * d;
        }
    }
    Ok((sum / T::lit((idx.len() * idx.len()) as f64)).sqrt())
}

/// `|A n B| / |A u B|`, taken as 1 for two empty sets. Inputs need not be
/// sorted.
pub fn jaccard<T: Scalar>(a: &[usize], b: &[usize]) -> T {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_unstable();
    a.dedup();
    b.sort_unstable();
    b.dedup();
    let inter = a.iter().filter(|x| b.binary_search(x).is_ok()).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        T::one()
    } else {
        T::lit(inter as f64 / union as f64)
    }
}

/// `sum min(a, a') / sum max(a, a')` over nonnegative dual coefficients.
pub fn weighted_jaccard<T: Scalar>(alpha_true: &[T], alpha_est: &[T]) -> Result<T> {
    if alpha_true.len() != alpha_est.len() {
        return Err(Error::DimensionMismatch {
            expected: alpha_true.len(),
            got: alpha_est.len(),
        });
    }
    let mut lo = T::zero();
    let mut hi = T::zero();
    for (&a, &b) in alpha_true.iter().zip(alpha_est) {
        if !(a >= T::zero() && b >= T::zero()) {
            return Err(Error::Domain(format!(
                "negative dual coefficient ({a}, {b})"
            )));
        }
        lo = lo + a.min(b);
        hi = hi + a.max(b);
    }
    Ok(if hi == T::zero() { T::one() } else { lo / hi })
}

pub fn relative_margin_error<T: Scalar>(w_true: T, w_est: T) -> Result<T> {
    if !(w_true > T::zero()) {
        return Err(Error::Domain(format!(
            "reference margin norm {w_true} must be positive"
        )));
    }
    Ok((w_est - w_true).abs() / w_true)
}

/// Decision-function RMSE divided by the reference `||w||`.
pub fn decision_rmse<T: Scalar>(f_true: &[T], f_est: &[T], w_true: T) -> Result<T> {
    if f_true.len() != f_est.len() {
        return Err(Error::DimensionMismatch {
            expected: f_true.len(),
            got: f_est.len(),
        });
    }
    if !(w_true > T::zero()) {
        return Err(Error::Domain(format!(
            "reference margin norm {w_true} must be positive"
        )));
    }
    if f_true.is_empty() {
        return Ok(T::zero());
    }
    let ss: T = f_true
        .iter()
        .zip(f_est)
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum();
    Ok((ss / T::lit(f_true.len() as f64)).sqrt() / w_true)
}

/// `(uniform - adaptive) / uniform`; positive when adaptive is better.
pub fn relative_improvement<T: Scalar>(rmse_uniform: T, rmse_adaptive: T) -> Result<T> {
    if !(rmse_uniform > T::zero()) {
        return Err(Error::Domain(format!(
            "baseline error {rmse_uniform} must be positive"
        )));
    }
    Ok((rmse_uniform - rmse_adaptive) / rmse_uniform)
}

/// Mean-absolute-difference Gini coefficient of nonnegative weights.
pub fn gini<T: Scalar>(alpha: &[T]) -> Result<T> {
    let total: T = alpha.iter().copied().sum();
    if !(total > T::zero()) {
        return Err(Error::Domain("gini of an all-zero vector".into()));
    }
    let n = alpha.len();
    let mut acc = T::zero();
    for (k, &a) in alpha.iter().enumerate() {
        for &b in &alpha[k + 1..] {
            acc = acc + (a - b).abs();
        }
    }
    // each unordered pair counted once, hence n rather than 2n
    Ok(acc / (T::lit(n as f64) * total))
}

/// Everything about the true-kernel model that the metrics compare against.
#[derive(Clone, Debug)]
pub struct Reference<T> {
    pub k_true: KernelMatrix<T>,
    pub model: SvmModel<T>,
    pub margin: T,
    pub decision: Vec<T>,
}

impl<T: Scalar> Reference<T> {
    pub fn new(k_true: KernelMatrix<T>, model: SvmModel<T>) -> Result<Self> {
        let margin = margin_norm(&model, &k_true);
        if !(margin > T::zero()) {
            return Err(Error::DegenerateProblem(
                "reference model has zero margin norm".into(),
            ));
        }
        let decision = decision_values(&model, &k_true)?;
        Ok(Self {
            k_true,
            model,
            margin,
            decision,
        })
    }

    /// Scores a model trained on `k_hat`. Kernel errors compare `k_hat` with
    /// the truth. The learned classifier `(alpha, b)` is judged through the
    /// true kernel function, so its decision values and margin norm are
    /// evaluated on `k_true`.
    pub fn compare(&self, k_hat: &KernelMatrix<T>, est: &SvmModel<T>) -> Result<MetricBundle<T>> {
        let sv = self.model.support();
        let rmse_k_sv = if sv.is_empty() {
            T::zero()
        } else {
            kernel_rmse(&self.k_true, k_hat, Some(sv))?
        };
        let f_est = decision_values(est, &self.k_true)?;
        Ok(MetricBundle {
            rmse_k: kernel_rmse(&self.k_true, k_hat, None)?,
            rmse_k_sv,
            jaccard: jaccard(sv, est.support()),
            weighted_jaccard: weighted_jaccard(self.model.alpha(), est.alpha())?,
            rel_margin_err: relative_margin_error(self.margin, margin_norm(est, &self.k_true))?,
            rmse_f_normalized: decision_rmse(&self.decision, &f_est, self.margin)?,
        })
    }
}
