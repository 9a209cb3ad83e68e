//! Pairwise working-set optimization with maximal-violating-pair selection.

use super::{check_problem, decision_values, support_tolerance, SvmModel};
use crate::error::{Error, Result};
use crate::kernel::KernelMatrix;
use crate::{Label, Scalar};

/// Curvature floor along the SMO direction; indefinite estimates can make
/// `K_ii + K_jj - 2 K_ij` nonpositive.
const MIN_CURVATURE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions<T> {
    /// Stop once the maximal KKT violation gap drops below this.
    pub kkt_tol: T,
    /// Defaults to `100_000 * n`.
    pub max_iter: Option<usize>,
}

impl<T: Scalar> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            kkt_tol: T::lit(1e-6),
            max_iter: None,
        }
    }
}

impl<T: Scalar> SolverOptions<T> {
    pub fn with_tol(kkt_tol: T) -> Self {
        Self {
            kkt_tol,
            max_iter: None,
        }
    }
}

/// Trains the soft-margin SVM dual on a precomputed kernel.
///
/// The gradient `G = Q a - 1` with `Q_ij = y_i y_j K_ij` is maintained
/// incrementally. Each iteration picks `i` maximizing `-y_t G_t` over the
/// indices that may move up and `j` minimizing it over those that may move
/// down, then solves the two-variable subproblem exactly and clips to the box.
/// The bias is the mean of `y_i - sum_j a_j y_j K_ij` over free support
/// vectors, or the midpoint of the feasible interval when none are free.
pub fn train<T: Scalar>(
    k: &KernelMatrix<T>,
    labels: &[Label],
    c: T,
    opts: SolverOptions<T>,
) -> Result<SvmModel<T>> {
    check_problem(k, labels, c)?;
    let n = k.n();
    let max_iter = opts.max_iter.unwrap_or(100_000 * n);
    let y: Vec<T> = labels.iter().map(|&l| T::sign_of(l)).collect();
    let tau = T::lit(MIN_CURVATURE);
    let zero = T::zero();

    let mut alpha = vec![zero; n];
    let mut grad = vec![-T::one(); n];
    let mut iterations = 0;

    let in_up = |a: T, yt: T| (yt > zero && a < c) || (yt < zero && a > zero);
    let in_low = |a: T, yt: T| (yt > zero && a > zero) || (yt < zero && a < c);

    loop {
        let mut gmax = T::neg_infinity();
        let mut gmin = T::infinity();
        let mut i_sel = usize::MAX;
        let mut j_sel = usize::MAX;
        for t in 0..n {
            let v = -y[t] * grad[t];
            if in_up(alpha[t], y[t]) && v > gmax {
                gmax = v;
                i_sel = t;
            }
            if in_low(alpha[t], y[t]) && v < gmin {
                gmin = v;
                j_sel = t;
            }
        }
        let gap = gmax - gmin;
        if i_sel == usize::MAX || j_sel == usize::MAX || gap <= opts.kkt_tol {
            break;
        }
        if iterations >= max_iter {
            return Err(Error::Convergence {
                iterations,
                violation: gap.as_f64(),
            });
        }
        iterations += 1;

        let (i, j) = (i_sel, j_sel);
        let (old_ai, old_aj) = (alpha[i], alpha[j]);
        let qij = y[i] * y[j] * k.get(i, j);
        if y[i] != y[j] {
            let mut quad = k.get(i, i) + k.get(j, j) + T::lit(2.0) * qij;
            if quad <= zero {
                quad = tau;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] = alpha[i] + delta;
            alpha[j] = alpha[j] + delta;
            if diff > zero {
                if alpha[j] < zero {
                    alpha[j] = zero;
                    alpha[i] = diff;
                }
            } else if alpha[i] < zero {
                alpha[i] = zero;
                alpha[j] = -diff;
            }
            if diff > zero {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = k.get(i, i) + k.get(j, j) - T::lit(2.0) * qij;
            if quad <= zero {
                quad = tau;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] = alpha[i] - delta;
            alpha[j] = alpha[j] + delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < zero {
                alpha[j] = zero;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < zero {
                alpha[i] = zero;
                alpha[j] = sum;
            }
        }

        let dai = alpha[i] - old_ai;
        let daj = alpha[j] - old_aj;
        if dai == zero && daj == zero {
            // The pair is stuck at round-off level; nothing left to gain.
            break;
        }
        let (ri, rj) = (k.row(i), k.row(j));
        for t in 0..n {
            grad[t] = grad[t] + y[t] * (y[i] * ri[t] * dai + y[j] * rj[t] * daj);
        }
    }

    let bias = bias_from_gradient(&alpha, &y, &grad, c);
    let mut model = SvmModel {
        alpha,
        labels: labels.to_vec(),
        bias,
        c,
        support: Vec::new(),
        free: Vec::new(),
        decision: Vec::new(),
        iterations,
    };
    model.decision = decision_values(&model, k)?;
    model.classify();
    Ok(model)
}

fn bias_from_gradient<T: Scalar>(alpha: &[T], y: &[T], grad: &[T], c: T) -> T {
    let tol = support_tolerance(c);
    let mut upper = T::infinity();
    let mut lower = T::neg_infinity();
    let mut free_sum = T::zero();
    let mut free_count = 0usize;
    for t in 0..alpha.len() {
        // candidate b for point t is -y_t G_t
        let b = -y[t] * grad[t];
        let positive = y[t] > T::zero();
        if alpha[t] >= c - tol {
            if positive {
                upper = upper.min(b);
            } else {
                lower = lower.max(b);
            }
        } else if alpha[t] <= tol {
            if positive {
                lower = lower.max(b);
            } else {
                upper = upper.min(b);
            }
        } else {
            free_sum = free_sum + b;
            free_count += 1;
        }
    }
    if free_count > 0 {
        free_sum / T::lit(free_count as f64)
    } else {
        match (lower.is_finite(), upper.is_finite()) {
            (true, true) => T::lit(0.5) * (lower + upper),
            (true, false) => lower,
            (false, true) => upper,
            (false, false) => T::zero(),
        }
    }
}
