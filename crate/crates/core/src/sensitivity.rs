//! Allocation signals derived from a trained model.
//!
//! Two effects decide where a shot is worth spending. A kernel entry moves the
//! margin in proportion to `a_i a_j y_i y_j`, so only support pairs matter to
//! first order. Separately, a point close to the margin may flip between the
//! support and non-support sets once the estimate shifts; that risk is
//! modelled by a Gaussian surrogate on the decision value.

use crate::error::{Error, Result};
use crate::kernel::KernelMatrix;
use crate::measurement::{smoothed_estimate, MeasurementLedger};
use crate::normal::std_normal_cdf;
use crate::svm::{decision_values, SvmModel};
use crate::tri::UpperTri;
use crate::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct SensitivitySignals<T> {
    pub margin_gradient: UpperTri<T>,
    pub residuals: Vec<T>,
    pub decision_variance: Vec<T>,
    pub transition_prob: Vec<T>,
}

impl<T: Scalar> SensitivitySignals<T> {
    /// Evaluates every signal for `model` on the estimate `k_hat`.
    pub fn compute(
        model: &SvmModel<T>,
        k_hat: &KernelMatrix<T>,
        entry_variances: &UpperTri<T>,
    ) -> Result<Self> {
        let residuals = margin_residuals(model, k_hat)?;
        let decision_variance = decision_variance(model, entry_variances)?;
        let transition_prob = residuals
            .iter()
            .zip(&decision_variance)
            .map(|(&d, &v)| sv_transition_prob(d, v.sqrt()))
            .collect();
        Ok(Self {
            margin_gradient: margin_gradient(model),
            residuals,
            decision_variance,
            transition_prob,
        })
    }
}

/// `G_ij = a_i a_j y_i y_j` for `i < j`.
pub fn margin_gradient<T: Scalar>(model: &SvmModel<T>) -> UpperTri<T> {
    let s = model.signed_alpha();
    UpperTri::from_fn(model.n(), |i, j| s[i] * s[j])
}

/// `y_i f_i - 1`; negative inside the margin, zero on it.
pub fn margin_residuals<T: Scalar>(model: &SvmModel<T>, k: &KernelMatrix<T>) -> Result<Vec<T>> {
    let f = decision_values(model, k)?;
    Ok(f.iter()
        .zip(model.labels())
        .map(|(&fi, &y)| T::sign_of(y) * fi - T::one())
        .collect())
}

/// Variance of each decision value when the off-diagonal estimates are
/// independent with the given variances. The diagonal is known exactly.
pub fn decision_variance<T: Scalar>(
    model: &SvmModel<T>,
    entry_variances: &UpperTri<T>,
) -> Result<Vec<T>> {
    let n = model.n();
    if entry_variances.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: entry_variances.n(),
        });
    }
    let sq: Vec<T> = model.signed_alpha().iter().map(|&c| c * c).collect();
    let mut out = vec![T::zero(); n];
    for ((i, j), &v) in entry_variances.iter() {
        out[i] = out[i] + sq[j] * v;
        out[j] = out[j] + sq[i] * v;
    }
    Ok(out)
}

/// `Phi(-delta / sigma_f)`; the noiseless limit is the indicator of
/// `delta <= 0`.
pub fn sv_transition_prob<T: Scalar>(delta: T, sigma_f: T) -> T {
    if sigma_f > T::zero() {
        T::lit(std_normal_cdf(-(delta / sigma_f).as_f64()))
    } else if delta <= T::zero() {
        T::one()
    } else {
        T::zero()
    }
}

/// Plug-in variance `p(1-p)/N` of every estimate, with `p` the smoothed
/// estimate. When the learner is told the hardware noise level, the
/// correlated term `(1 - 1/N) sigma^2` is added.
pub fn entry_variances<T: Scalar>(
    ledger: &MeasurementLedger,
    known_sigma: Option<&UpperTri<T>>,
) -> Result<UpperTri<T>> {
    if let Some(s) = known_sigma {
        if s.n() != ledger.n() {
            return Err(Error::DimensionMismatch {
                expected: ledger.n(),
                got: s.n(),
            });
        }
    }
    let mut values = Vec::with_capacity(ledger.num_pairs());
    for ((i, j), _, m) in ledger.iter() {
        if m == 0 {
            return Err(Error::NoData { i, j });
        }
        let p: T = smoothed_estimate(ledger, i, j)?;
        let shots = T::from_count(m);
        let mut v = p * (T::one() - p) / shots;
        if let Some(s) = known_sigma {
            let sig = *s.get(i, j);
            v = v + (T::one() - shots.recip()) * sig * sig;
        }
        values.push(v);
    }
    Ok(UpperTri::from_vec(ledger.n(), values))
}

/// Per-entry scores for the next multinomial round.
#[derive(Clone, Debug, PartialEq)]
pub struct Scores<T> {
    pub values: UpperTri<T>,
    /// Every raw score was zero and the scores were replaced by ones.
    pub uniform_fallback: bool,
}

/// `s_ij = (1 - lambda) |a_i a_j| + lambda P_i P_j C^2`, modulated by the
/// Bernoulli standard deviation `sqrt(p(1-p))` of the smoothed estimate.
pub fn allocation_scores<T: Scalar>(
    model: &SvmModel<T>,
    ledger: &MeasurementLedger,
    signals: &SensitivitySignals<T>,
    lambda: T,
    c: T,
) -> Result<Scores<T>> {
    if !(lambda >= T::zero() && lambda <= T::one()) {
        return Err(Error::Domain(format!(
            "lambda = {lambda} is outside [0, 1]"
        )));
    }
    let n = model.n();
    if ledger.n() != n || signals.transition_prob.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: ledger.n(),
        });
    }
    let a = model.alpha();
    let p_sv = &signals.transition_prob;
    let c2 = c * c;
    let mut values = Vec::with_capacity(ledger.num_pairs());
    for ((i, j), _, _) in ledger.iter() {
        let s = (T::one() - lambda) * (a[i] * a[j]).abs() + lambda * p_sv[i] * p_sv[j] * c2;
        let p: T = smoothed_estimate(ledger, i, j)?;
        values.push(s * (p * (T::one() - p)).sqrt());
    }
    let uniform_fallback = values.iter().all(|&v| v == T::zero());
    if uniform_fallback {
        values.iter_mut().for_each(|v| *v = T::one());
    }
    Ok(Scores {
        values: UpperTri::from_vec(n, values),
        uniform_fallback,
    })
}
