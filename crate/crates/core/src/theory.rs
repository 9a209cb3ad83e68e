//! Closed-form variance and cost expressions.

use crate::allocation::Allocation;
use crate::error::{Error, Result};
use crate::tri::{num_pairs, UpperTri};
use crate::Scalar;

/// Analytic cost of uniform versus adaptive measurement.
///
/// `c_q` is the cost of one shot and `c_c` the cost of one unit of classical
/// work, with one SVM training counted as `n^3` units. An adaptive run uses a
/// fraction `r` of the budget and retrains `rounds + 1` times.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostModel<T> {
    pub c_q: T,
    pub c_c: T,
    pub rounds: usize,
    pub r: T,
    pub n: usize,
    pub n_bar: T,
}

impl<T: Scalar> CostModel<T> {
    /// `N_tot = n (n - 1) / 2 * N_bar`.
    pub fn n_tot(&self) -> T {
        T::lit(num_pairs(self.n) as f64) * self.n_bar
    }
}

/// `M sum(w) / N_tot`.
pub fn v_uniform<T: Scalar>(weights: &UpperTri<T>, n_tot: T) -> T {
    let m = T::lit(weights.len() as f64);
    m * weights.values().iter().copied().sum::<T>() / n_tot
}

/// `(sum sqrt(w))^2 / N_tot`.
pub fn v_star<T: Scalar>(weights: &UpperTri<T>, n_tot: T) -> T {
    let s: T = weights.values().iter().map(|w| w.sqrt()).sum();
    s * s / n_tot
}

/// Second-order increase of the variance when the oracle allocation is moved
/// by `deltas`: `sum w (dN)^2 / N*^3`.
pub fn perturbation_penalty<T: Scalar>(
    weights: &UpperTri<T>,
    oracle: &Allocation<T>,
    deltas: &UpperTri<T>,
) -> Result<T> {
    let counts = oracle.counts();
    if deltas.n() != weights.n() || counts.n() != weights.n() {
        return Err(Error::DimensionMismatch {
            expected: weights.n(),
            got: deltas.n(),
        });
    }
    let net: T = deltas.values().iter().copied().sum();
    let scale = oracle.budget().abs().max(T::one());
    if net.abs() > T::lit(1e-9) * scale {
        return Err(Error::ConstraintViolation(format!(
            "perturbation changes the budget by {net}"
        )));
    }
    let mut total = T::zero();
    for (((i, j), &w), (&n, &d)) in weights
        .iter()
        .zip(counts.values().iter().zip(deltas.values()))
    {
        if !(n + d > T::zero()) && (w > T::zero() || d != T::zero()) {
            return Err(Error::ConstraintViolation(format!(
                "entry ({i}, {j}) would receive {} shots",
                n + d
            )));
        }
        if w > T::zero() {
            total = total + w * d * d / (n * n * n);
        }
    }
    Ok(total)
}

/// Break-even cost ratio `tau* = (n - 1)(1 - r) N_bar / (2 n^2 R)`.
pub fn tau_critical<T: Scalar>(model: &CostModel<T>) -> Result<T> {
    if model.rounds == 0 {
        return Err(Error::Domain(
            "tau* is undefined without adaptive rounds".into(),
        ));
    }
    if model.n < 2 {
        return Err(Error::TooSmall(model.n));
    }
    let n = T::lit(model.n as f64);
    Ok((n - T::one()) * (T::one() - model.r) * model.n_bar
        / (T::lit(2.0) * n * n * T::lit(model.rounds as f64)))
}

/// `(uniform, adaptive)` totals for a nominal budget `n_tot`.
pub fn cost_totals<T: Scalar>(model: &CostModel<T>, n_tot: T) -> (T, T) {
    let n3 = T::lit((model.n as f64).powi(3));
    let uniform = model.c_q * n_tot + model.c_c * n3;
    let adaptive = model.c_q * model.r * n_tot + T::lit((model.rounds + 1) as f64) * model.c_c * n3;
    (uniform, adaptive)
}

/// Allocation-independent floor `sum_{i<j} (a_i a_j)^2 sigma_ij^2` on the
/// margin variance.
pub fn variance_floor<T: Scalar>(alpha: &[T], sigma_phys: &UpperTri<T>) -> Result<T> {
    if alpha.len() != sigma_phys.n() {
        return Err(Error::DimensionMismatch {
            expected: sigma_phys.n(),
            got: alpha.len(),
        });
    }
    Ok(sigma_phys
        .iter()
        .map(|((i, j), &s)| {
            let g = alpha[i] * alpha[j];
            g * g * s * s
        })
        .sum())
}
