//! Exhaustive reference solver for tiny dual problems.
//!
//! The dual maximum is attained on some face of the feasible polytope. A face
//! fixes every coordinate to `0`, to `C`, or leaves it free; on the face the
//! problem is an equality-constrained quadratic whose stationary point solves
//! a small KKT system. Enumerating all `3^n` faces and keeping the best
//! feasible stationary point therefore finds the global maximum for any
//! concave instance, without any iterative search.

use super::{check_problem, dual_objective};
use crate::error::{Error, Result};
use crate::kernel::KernelMatrix;
use crate::{Label, Scalar};

pub const ORACLE_MAX_N: usize = 6;

/// Maximizes the dual by enumerating every face of the feasible polytope.
///
/// `feas_tol` is the slack allowed when checking that a face's stationary
/// point lies inside `[0, C]`; the returned point is clipped back to the box.
pub fn brute_force_dual<T: Scalar>(
    k: &KernelMatrix<T>,
    labels: &[Label],
    c: T,
    feas_tol: T,
) -> Result<Vec<T>> {
    let n = k.n();
    if n > ORACLE_MAX_N {
        return Err(Error::TooLarge {
            n,
            max: ORACLE_MAX_N,
        });
    }
    check_problem(k, labels, c)?;
    let cf = c.as_f64();
    let tol = feas_tol.as_f64();
    let y: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
    let q = |i: usize, j: usize| y[i] * y[j] * k.get(i, j).as_f64();

    let mut best: Option<(f64, Vec<f64>)> = None;
    let faces = 3usize.pow(n as u32);
    let mut state = vec![0u8; n];
    for code in 0..faces {
        let mut rest = code;
        for s in state.iter_mut() {
            *s = (rest % 3) as u8;
            rest /= 3;
        }
        let free: Vec<usize> = (0..n).filter(|&t| state[t] == 2).collect();
        let mut alpha: Vec<f64> = state
            .iter()
            .map(|&s| if s == 1 { cf } else { 0.0 })
            .collect();
        let fixed_balance: f64 = (0..n)
            .filter(|&t| state[t] != 2)
            .map(|t| y[t] * alpha[t])
            .sum();

        if free.is_empty() {
            if fixed_balance.abs() > tol {
                continue;
            }
        } else {
            // [Q_FF  y_F] [a_F]   [1 - Q_FB a_B]
            // [y_F'   0 ] [mu ] = [ -y_B' a_B  ]
            let m = free.len();
            let mut sys = vec![vec![0.0; m + 2]; m + 1];
            for (r, &i) in free.iter().enumerate() {
                for (s, &j) in free.iter().enumerate() {
                    sys[r][s] = q(i, j);
                }
                sys[r][m] = y[i];
                let fixed_pull: f64 = (0..n)
                    .filter(|&t| state[t] == 1)
                    .map(|t| q(i, t) * cf)
                    .sum();
                sys[r][m + 1] = 1.0 - fixed_pull;
                sys[m][r] = y[i];
            }
            sys[m][m + 1] = -fixed_balance;
            let Some(sol) = solve_dense(sys) else {
                continue;
            };
            if free
                .iter()
                .zip(&sol)
                .any(|(_, &a)| a < -tol || a > cf + tol)
            {
                continue;
            }
            for (&i, &a) in free.iter().zip(&sol) {
                alpha[i] = a.clamp(0.0, cf);
            }
        }
        let cand: Vec<T> = alpha.iter().map(|&a| T::lit(a)).collect();
        let value = dual_objective(&cand, labels, k).as_f64();
        if best.as_ref().is_none_or(|(v, _)| value > *v) {
            best = Some((value, alpha));
        }
    }
    // alpha = 0 is always feasible, so some face qualifies.
    let (_, alpha) = best.expect("zero vector is feasible");
    Ok(alpha.into_iter().map(T::lit).collect())
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
/// Returns `None` for (numerically) singular systems.
fn solve_dense(mut a: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let m = a.len();
    let scale = a
        .iter()
        .flat_map(|r| r[..m].iter())
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
        .max(1.0);
    for col in 0..m {
        let pivot = (col..m).max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))?;
        if a[pivot][col].abs() <= 1e-12 * scale {
            return None;
        }
        a.swap(col, pivot);
        for r in col + 1..m {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for s in col..=m {
                    a[r][s] -= f * a[col][s];
                }
            }
        }
    }
    let mut x = vec![0.0; m];
    for r in (0..m).rev() {
        let tail: f64 = (r + 1..m).map(|s| a[r][s] * x[s]).sum();
        x[r] = (a[r][m] - tail) / a[r][r];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_pair_matches_analytic_solution() {
        let k = KernelMatrix::<f64>::identity(2);
        let a = brute_force_dual(&k, &[1, -1], 10.0, 1e-9).unwrap();
        assert!((a[0] - 1.0).abs() < 1e-12 && (a[1] - 1.0).abs() < 1e-12);
        let a = brute_force_dual(&k, &[1, -1], 0.5, 1e-9).unwrap();
        assert_eq!(a, vec![0.5, 0.5]);
    }

    #[test]
    fn vanishing_box_collapses_alpha() {
        let k = KernelMatrix::<f64>::identity(3);
        let a = brute_force_dual(&k, &[1, -1, 1], 1e-9, 1e-12).unwrap();
        assert!(a.iter().all(|&v| v <= 1e-9));
    }

    #[test]
    fn refuses_large_problems() {
        let k = KernelMatrix::<f64>::identity(7);
        assert!(matches!(
            brute_force_dual(&k, &[1, -1, 1, -1, 1, -1, 1], 1.0, 1e-9),
            Err(Error::TooLarge { n: 7, .. })
        ));
    }

    #[test]
    fn agrees_with_grid_search_on_three_points() {
        // independent check: grid over (a0, a1), a2 fixed by the equality
        let k = KernelMatrix::<f64>::from_rows(vec![
            vec![1.0, 0.3, 0.6],
            vec![0.3, 1.0, 0.2],
            vec![0.6, 0.2, 1.0],
        ])
        .unwrap();
        let y = [1, -1, -1];
        let c = 2.0;
        let steps = 800;
        let mut best = f64::NEG_INFINITY;
        for u in 0..=steps {
            for v in 0..=steps {
                let a0 = c * u as f64 / steps as f64;
                let a1 = c * v as f64 / steps as f64;
                let a2 = a0 - a1; // y0 a0 + y1 a1 + y2 a2 = 0
                if !(0.0..=c).contains(&a2) {
                    continue;
                }
                best = best.max(dual_objective(&[a0, a1, a2], &y, &k));
            }
        }
        let a = brute_force_dual(&k, &y, c, 1e-9).unwrap();
        let exact = dual_objective(&a, &y, &k);
        assert!(exact >= best - 1e-12);
        assert!(exact - best < 1e-4, "grid {best} vs exact {exact}");
    }
}
