//! Oracle and finite-shot allocation variance as the margin weights are made
//! more heterogeneous.
//!
//! For each dataset the margin weights of the true-kernel SVM are blended
//! with their mean, `w(t) = (1 - t) mean + t w`, which moves the coefficient
//! of variation from 0 up to that of the data. The oracle curves are the
//! closed forms. The finite-shot curves are Monte Carlo estimates for
//! integer allocations. Each replicate draws every entry as
//! `Binomial(N_ij, 1/2)` and forms `sum sqrt(w_ij) (K_ij - 1/2) / (1/2)`,
//! whose variance is exactly `sum w_ij / N_ij`.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde_json::{json, Value};
use shot_alloc::allocation::{
    margin_weights, oracle_allocation, round_allocation, sampling_variance, uniform_allocation,
    Allocation,
};
use shot_alloc::synthetic::{coefficient_of_variation, interpolate_weights};
use shot_alloc::theory::{v_star, v_uniform};
use shot_alloc::{Error, UpperTri};

use super::{build_problem, rng_from, trial_seeds, DataSettings, LearnSettings, RunSettings};
use crate::error::{CliError, CliResult};
use crate::output::{Field, RowSink};
use crate::pool::run_ordered;
use crate::stats::mean;

#[derive(Clone, Debug)]
pub struct TheoryVariance {
    pub data: DataSettings,
    pub learn: LearnSettings,
    pub run: RunSettings,
    pub t_grid: Vec<f64>,
    pub mc_reps: usize,
}

impl Default for TheoryVariance {
    fn default() -> Self {
        Self {
            data: DataSettings::default(),
            learn: LearnSettings::default(),
            run: RunSettings {
                trials: 5,
                ..RunSettings::default()
            },
            t_grid: (0..=10).map(|k| k as f64 / 10.0).collect(),
            mc_reps: 2000,
        }
    }
}

/// One dataset at one interpolation point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TheoryPoint {
    pub trial: usize,
    pub t: f64,
    pub cv: f64,
    pub v_star: f64,
    pub v_uniform: f64,
    /// Exact `sum w / N` for the rounded oracle allocation.
    pub exact_optimal: f64,
    pub exact_uniform: f64,
    pub mc_optimal: f64,
    pub mc_optimal_se: f64,
    pub mc_uniform: f64,
    pub mc_uniform_se: f64,
}

impl TheoryPoint {
    pub fn oracle_gap(&self) -> f64 {
        self.v_uniform - self.v_star
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TheorySummary {
    pub trials: usize,
    pub points: Vec<TheoryPoint>,
}

impl TheorySummary {
    pub fn to_json(&self) -> Value {
        let first = self.points.first().map_or(0, |p| p.trial);
        let t_values: Vec<f64> = self
            .points
            .iter()
            .filter(|p| p.trial == first)
            .map(|p| p.t)
            .collect();
        let per_t: Vec<Value> = t_values
            .iter()
            .map(|&t| {
                let at: Vec<&TheoryPoint> = self.points.iter().filter(|p| p.t == t).collect();
                let avg =
                    |f: fn(&TheoryPoint) -> f64| mean(&at.iter().map(|p| f(p)).collect::<Vec<_>>());
                json!({
                    "t": t,
                    "mean_cv": avg(|p| p.cv),
                    "mean_v_star": avg(|p| p.v_star),
                    "mean_v_uniform": avg(|p| p.v_uniform),
                    "mean_mc_optimal": avg(|p| p.mc_optimal),
                    "mean_mc_uniform": avg(|p| p.mc_uniform),
                })
            })
            .collect();
        json!({ "trials": self.trials, "by_t": per_t })
    }
}

pub const THEORY_COLUMNS: &[&str] = &[
    "experiment",
    "trial",
    "trial_seed",
    "t",
    "cv",
    "curve",
    "oracle",
    "n",
    "n_tot",
    "variance",
    "std_error",
    "exact_variance",
];

/// Sample variance of the weighted estimator over `reps` replicates, with
/// its standard error under normality.
pub fn monte_carlo_variance<R: Rng + ?Sized>(
    weights: &UpperTri<f64>,
    counts: &Allocation<u64>,
    reps: usize,
    rng: &mut R,
) -> CliResult<(f64, f64)> {
    let mut terms = Vec::new();
    for (((i, j), &w), &n) in weights.iter().zip(counts.counts().values()) {
        if w > 0.0 {
            if n == 0 {
                return Err(Error::InfiniteVariance { i, j }.into());
            }
            let draw = Binomial::new(n, 0.5).map_err(|e| Error::Domain(e.to_string()))?;
            terms.push((w.sqrt(), n as f64, draw));
        }
    }
    let samples: Vec<f64> = (0..reps)
        .map(|_| {
            terms
                .iter()
                .map(|(root, n, draw)| root * (draw.sample(rng) as f64 / n - 0.5) * 2.0)
                .sum()
        })
        .collect();
    let m = mean(&samples);
    let var = samples.iter().map(|s| (s - m) * (s - m)).sum::<f64>() / (reps - 1) as f64;
    Ok((var, var * (2.0 / (reps - 1) as f64).sqrt()))
}

impl TheoryVariance {
    pub fn validate(&self) -> CliResult<()> {
        if self.t_grid.is_empty() {
            return Err(CliError::usage("the t grid is empty"));
        }
        if let Some(t) = self.t_grid.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            return Err(CliError::usage(format!("t = {t} is outside [0, 1]")));
        }
        if self.mc_reps < 2 {
            return Err(CliError::usage("--mc-reps must be at least 2"));
        }
        self.data.validate()?;
        self.learn.validate(self.data.n)?;
        self.run.validate()
    }

    fn trial(&self, trial: usize) -> CliResult<(u64, Vec<TheoryPoint>)> {
        let seeds = trial_seeds(self.run.seed, trial);
        let (data, k) = self.data.sample(seeds.data)?;
        let problem = build_problem(k, data.labels, self.data.sigma_phys, &self.learn)?;
        let n = problem.n();
        let base = margin_weights(&problem.reference.model, problem.k_true());
        let n_tot = self.learn.n_tot(n);
        let budget = n_tot as f64;
        let mut alloc_rng = rng_from(seeds.uniform);
        let mut mc_rng = rng_from(seeds.adaptive);
        let mut points = Vec::with_capacity(self.t_grid.len());
        for &t in &self.t_grid {
            let w = UpperTri::from_vec(n, interpolate_weights(base.values(), t)?);
            let optimal = round_allocation(&w, &oracle_allocation(&w, budget)?, n_tot)?;
            let uniform = uniform_allocation(n, n_tot, &mut alloc_rng)?;
            let (mc_optimal, mc_optimal_se) =
                monte_carlo_variance(&w, &optimal, self.mc_reps, &mut mc_rng)?;
            let (mc_uniform, mc_uniform_se) =
                monte_carlo_variance(&w, &uniform, self.mc_reps, &mut mc_rng)?;
            points.push(TheoryPoint {
                trial,
                t,
                cv: coefficient_of_variation(w.values())?,
                v_star: v_star(&w, budget),
                v_uniform: v_uniform(&w, budget),
                exact_optimal: sampling_variance(&w, &optimal.to_real())?,
                exact_uniform: sampling_variance(&w, &uniform.to_real())?,
                mc_optimal,
                mc_optimal_se,
                mc_uniform,
                mc_uniform_se,
            });
        }
        Ok((seeds.data, points))
    }

    pub fn run(&self, sink: &mut dyn RowSink) -> CliResult<TheorySummary> {
        self.validate()?;
        let n = self.data.n;
        let n_tot = self.learn.n_tot(n);
        let mut all = Vec::new();
        run_ordered(
            self.run.trials,
            self.run.threads,
            |trial| self.trial(trial),
            |trial, (seed, points)| {
                for p in &points {
                    let curves = [
                        ("oracle_optimal", true, p.v_star, None, p.v_star),
                        ("oracle_uniform", true, p.v_uniform, None, p.v_uniform),
                        (
                            "finite_optimal",
                            false,
                            p.mc_optimal,
                            Some(p.mc_optimal_se),
                            p.exact_optimal,
                        ),
                        (
                            "finite_uniform",
                            false,
                            p.mc_uniform,
                            Some(p.mc_uniform_se),
                            p.exact_uniform,
                        ),
                    ];
                    for (curve, oracle, variance, se, exact) in curves {
                        sink.push(vec![
                            Field::text("theory-variance"),
                            Field::UInt(trial as u64),
                            Field::UInt(seed),
                            Field::Float(p.t),
                            Field::Float(p.cv),
                            Field::text(curve),
                            Field::Bool(oracle),
                            Field::UInt(n as u64),
                            Field::UInt(n_tot),
                            Field::Float(variance),
                            Field::opt_float(se),
                            Field::Float(exact),
                        ])?;
                    }
                }
                all.extend(points);
                sink.flush()
            },
        )?;
        Ok(TheorySummary {
            trials: self.run.trials,
            points: all,
        })
    }
}
