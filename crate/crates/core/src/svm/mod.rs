//! Soft-margin kernel SVM on a precomputed, possibly indefinite kernel.
//!
//! The dual is
//!
//! ```text
//! max_a  sum_i a_i - 1/2 sum_ij a_i a_j y_i y_j K_ij
//! s.t.   0 <= a_i <= C,  sum_i a_i y_i = 0
//! ```
//!
//! and the decision function on training point `i` is
//! `f_i = sum_j a_j y_j K_ij + b`.

mod oracle;
mod smo;

pub use oracle::{brute_force_dual, ORACLE_MAX_N};
pub use smo::{train, SolverOptions};

use crate::error::{Error, Result};
use crate::kernel::KernelMatrix;
use crate::{Label, Scalar};

#[derive(Clone, Debug, PartialEq)]
pub struct SvmModel<T> {
    alpha: Vec<T>,
    labels: Vec<Label>,
    bias: T,
    c: T,
    support: Vec<usize>,
    free: Vec<usize>,
    /// Decision values on the kernel the model was built against.
    decision: Vec<T>,
    iterations: usize,
}

/// Support threshold `1e-8 * C`.
pub fn support_tolerance<T: Scalar>(c: T) -> T {
    T::lit(1e-8) * c
}

impl<T: Scalar> SvmModel<T> {
    /// Assembles a model from dual coefficients, e.g. for tests or replays.
    pub fn from_parts(
        alpha: Vec<T>,
        labels: Vec<Label>,
        bias: T,
        c: T,
        k: &KernelMatrix<T>,
    ) -> Result<Self> {
        if labels.len() != alpha.len() {
            return Err(Error::DimensionMismatch {
                expected: alpha.len(),
                got: labels.len(),
            });
        }
        if !(c > T::zero()) {
            return Err(Error::Domain(format!("box bound C = {c} must be positive")));
        }
        let mut model = Self {
            alpha,
            labels,
            bias,
            c,
            support: Vec::new(),
            free: Vec::new(),
            decision: Vec::new(),
            iterations: 0,
        };
        model.decision = decision_values(&model, k)?;
        model.classify();
        Ok(model)
    }

    fn classify(&mut self) {
        let tol = support_tolerance(self.c);
        self.support = (0..self.alpha.len())
            .filter(|&i| self.alpha[i] > tol)
            .collect();
        self.free = self
            .support
            .iter()
            .copied()
            .filter(|&i| self.alpha[i] < self.c - tol)
            .collect();
    }

    pub fn n(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &[T] {
        &self.alpha
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn bias(&self) -> T {
        self.bias
    }

    pub fn c(&self) -> T {
        self.c
    }

    /// Indices with `alpha_i > 1e-8 C`.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    /// Support vectors strictly inside the box.
    pub fn free(&self) -> &[usize] {
        &self.free
    }

    /// Decision values on the training kernel.
    pub fn training_decision(&self) -> &[T] {
        &self.decision
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// `alpha_i y_i`.
    pub fn signed_alpha(&self) -> Vec<T> {
        self.alpha
            .iter()
            .zip(&self.labels)
            .map(|(&a, &y)| a * T::sign_of(y))
            .collect()
    }
}

/// `f_i = sum_j alpha_j y_j K_ij + b` for every row of `k`.
pub fn decision_values<T: Scalar>(model: &SvmModel<T>, k: &KernelMatrix<T>) -> Result<Vec<T>> {
    if k.n() != model.n() {
        return Err(Error::DimensionMismatch {
            expected: model.n(),
            got: k.n(),
        });
    }
    let coef = model.signed_alpha();
    Ok((0..k.n())
        .map(|i| {
            k.row(i)
                .iter()
                .zip(&coef)
                .map(|(&kij, &c)| kij * c)
                .sum::<T>()
                + model.bias
        })
        .collect())
}

/// `sum_ij (a_i y_i) K_ij (a_j y_j)`; may be negative on an indefinite kernel.
pub fn quadratic_form<T: Scalar>(signed_alpha: &[T], k: &KernelMatrix<T>) -> T {
    (0..k.n())
        .map(|i| {
            let ri: T = k
                .row(i)
                .iter()
                .zip(signed_alpha)
                .map(|(&kij, &c)| kij * c)
                .sum();
            ri * signed_alpha[i]
        })
        .sum()
}

/// `||w||`, with the quadratic form floored at zero.
pub fn margin_norm<T: Scalar>(model: &SvmModel<T>, k: &KernelMatrix<T>) -> T {
    quadratic_form(&model.signed_alpha(), k)
        .max(T::zero())
        .sqrt()
}

/// The dual objective `sum a - 1/2 ||w||^2`.
pub fn dual_objective<T: Scalar>(alpha: &[T], labels: &[Label], k: &KernelMatrix<T>) -> T {
    let signed: Vec<T> = alpha
        .iter()
        .zip(labels)
        .map(|(&a, &y)| a * T::sign_of(y))
        .collect();
    alpha.iter().copied().sum::<T>() - T::lit(0.5) * quadratic_form(&signed, k)
}

/// Largest violation of complementary slackness on the margin residual
/// `y_i f_i - 1`, evaluated on `k`.
pub fn kkt_violation<T: Scalar>(model: &SvmModel<T>, k: &KernelMatrix<T>) -> Result<T> {
    let f = decision_values(model, k)?;
    let tol = support_tolerance(model.c);
    let mut worst = T::zero();
    for i in 0..model.n() {
        let r = T::sign_of(model.labels[i]) * f[i] - T::one();
        let a = model.alpha[i];
        let v = if a <= tol {
            (-r).max(T::zero())
        } else if a >= model.c - tol {
            r.max(T::zero())
        } else {
            r.abs()
        };
        worst = worst.max(v);
    }
    Ok(worst)
}

pub(crate) fn check_problem<T: Scalar>(k: &KernelMatrix<T>, labels: &[Label], c: T) -> Result<()> {
    if k.n() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: k.n(),
            got: labels.len(),
        });
    }
    if !(c > T::zero()) || !c.is_finite() {
        return Err(Error::Domain(format!("box bound C = {c} must be positive")));
    }
    if let Some(y) = labels.iter().find(|&&y| y != 1 && y != -1) {
        return Err(Error::Domain(format!("label {y} is not +1 or -1")));
    }
    if !(labels.contains(&1) && labels.contains(&-1)) {
        return Err(Error::DegenerateProblem(
            "labels contain a single class; the equality constraint forces alpha = 0".into(),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn analytic_model() -> (SvmModel<f64>, KernelMatrix<f64>) {
        let k = KernelMatrix::<f64>::identity(2);
        let m = SvmModel::from_parts(vec![1.0, 1.0], vec![1, -1], 0.0, 10.0, &k).unwrap();
        (m, k)
    }

    #[test]
    fn analytic_decision_and_margin() {
        let (m, k) = analytic_model();
        assert_eq!(decision_values(&m, &k).unwrap(), vec![1.0, -1.0]);
        assert!((margin_norm(&m, &k) - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(m.support(), &[0, 1]);
        assert_eq!(m.free(), &[0, 1]);
        assert_eq!(kkt_violation(&m, &k).unwrap(), 0.0);
    }

    #[test]
    fn empty_model() {
        let k = KernelMatrix::<f64>::identity(3);
        let m = SvmModel::from_parts(vec![0.0; 3], vec![1, -1, 1], 0.3, 1.0, &k).unwrap();
        assert_eq!(decision_values(&m, &k).unwrap(), vec![0.3; 3]);
        assert_eq!(margin_norm(&m, &k), 0.0);
        assert!(m.support().is_empty());
    }

    #[test]
    fn margin_scales_linearly_in_alpha() {
        let k = KernelMatrix::<f64>::from_rows(vec![
            vec![1.0, 0.3, 0.2],
            vec![0.3, 1.0, 0.6],
            vec![0.2, 0.6, 1.0],
        ])
        .unwrap();
        let base =
            SvmModel::from_parts(vec![0.4, 0.1, 0.3], vec![1, -1, -1], 0.0, 1.0, &k).unwrap();
        let scaled =
            SvmModel::from_parts(vec![1.2, 0.3, 0.9], vec![1, -1, -1], 0.0, 1.0, &k).unwrap();
        assert!((margin_norm(&scaled, &k) - 3.0 * margin_norm(&base, &k)).abs() < 1e-14);
    }

    #[test]
    fn dimension_mismatch() {
        let (m, _) = analytic_model();
        assert!(decision_values(&m, &KernelMatrix::<f64>::identity(3)).is_err());
    }
}
