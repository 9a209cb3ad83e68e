//! Sweep of the early-stopping threshold.

use serde_json::{json, Value};
use shot_alloc::adaptive::{run_adaptive, run_uniform, RunTrace};
use shot_alloc::metrics::relative_improvement;

use super::{
    build_problem, rng_from, stage_row, trial_seeds, DataSettings, Echo, LearnSettings, RunSettings,
};
use crate::error::{CliError, CliResult};
use crate::output::RowSink;
use crate::pool::run_ordered;
use crate::stats::{median, positive_rate};

/// Thirteen thresholds, six per decade, from `1e-2` to `1`.
pub fn default_epsilons() -> Vec<f64> {
    (0..=12)
        .map(|k| 10f64.powf(-2.0 + k as f64 / 6.0))
        .collect()
}

#[derive(Clone, Debug)]
pub struct StoppingSweep {
    pub data: DataSettings,
    pub learn: LearnSettings,
    pub run: RunSettings,
    pub epsilons: Vec<f64>,
}

impl Default for StoppingSweep {
    fn default() -> Self {
        Self {
            data: DataSettings::default(),
            learn: LearnSettings {
                rounds: 50,
                ..LearnSettings::default()
            },
            run: RunSettings::default(),
            epsilons: default_epsilons(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpsilonPoint {
    pub epsilon: f64,
    pub median_delta_rmse: f64,
    pub success_rate: f64,
    pub median_shot_fraction: f64,
    pub median_rounds: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StoppingSummary {
    pub trials: usize,
    pub points: Vec<EpsilonPoint>,
}

impl StoppingSummary {
    pub fn to_json(&self) -> Value {
        let points: Vec<Value> = self
            .points
            .iter()
            .map(|p| {
                json!({
                    "epsilon": p.epsilon,
                    "median_delta_rmse": p.median_delta_rmse,
                    "success_rate": p.success_rate,
                    "median_shot_fraction": p.median_shot_fraction,
                    "median_rounds": p.median_rounds,
                })
            })
            .collect();
        json!({ "trials": self.trials, "points": points })
    }
}

struct TrialResult {
    seed: u64,
    uniform: RunTrace<f64>,
    adaptive: Vec<RunTrace<f64>>,
}

impl StoppingSweep {
    pub fn validate(&self) -> CliResult<()> {
        if self.epsilons.is_empty() {
            return Err(CliError::usage("the epsilon list is empty"));
        }
        if let Some(e) = self
            .epsilons
            .iter()
            .find(|e| !(**e >= 0.0 && e.is_finite()))
        {
            return Err(CliError::usage(format!(
                "epsilon {e} must be finite and >= 0"
            )));
        }
        self.data.validate()?;
        self.learn.validate(self.data.n)?;
        self.run.validate()
    }

    pub fn run(&self, sink: &mut dyn RowSink) -> CliResult<StoppingSummary> {
        self.validate()?;
        let k = self.epsilons.len();
        let mut deltas = vec![Vec::new(); k];
        let mut fractions = vec![Vec::new(); k];
        let mut rounds = vec![Vec::new(); k];
        let uniform_echo = Echo {
            epsilon: 0.0,
            ..Echo::new(
                "stopping-sweep",
                self.data.n,
                &self.learn,
                self.data.sigma_phys,
            )
        };
        run_ordered(
            self.run.trials,
            self.run.threads,
            |trial| {
                let seeds = trial_seeds(self.run.seed, trial);
                let (data, kernel) = self.data.sample(seeds.data)?;
                let problem =
                    build_problem(kernel, data.labels, self.data.sigma_phys, &self.learn)?;
                let n = problem.n();
                let uniform = run_uniform(
                    &problem,
                    &self.learn.adaptive_config(n, seeds.uniform),
                    &mut rng_from(seeds.uniform),
                )?;
                // Every threshold reuses the same adaptive stream, so a run
                // with a larger threshold is a prefix of one with a smaller.
                let adaptive = self
                    .epsilons
                    .iter()
                    .map(|&epsilon| {
                        let learn = LearnSettings {
                            epsilon,
                            ..self.learn
                        };
                        let config = learn.adaptive_config(n, seeds.adaptive);
                        run_adaptive(&problem, &config, &mut rng_from(seeds.adaptive))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(TrialResult {
                    seed: seeds.data,
                    uniform,
                    adaptive,
                })
            },
            |trial, res| {
                sink.push(stage_row(
                    &uniform_echo,
                    trial,
                    res.seed,
                    "uniform",
                    &res.uniform,
                    res.uniform.final_record(),
                ))?;
                let base = res.uniform.final_record().metrics.rmse_f_normalized;
                for (e, trace) in res.adaptive.iter().enumerate() {
                    let echo = Echo {
                        epsilon: self.epsilons[e],
                        ..uniform_echo.clone()
                    };
                    sink.push(stage_row(
                        &echo,
                        trial,
                        res.seed,
                        "adaptive",
                        trace,
                        trace.final_record(),
                    ))?;
                    deltas[e].push(relative_improvement(
                        base,
                        trace.final_record().metrics.rmse_f_normalized,
                    )?);
                    fractions[e].push(trace.shot_fraction());
                    rounds[e].push(trace.rounds_executed() as f64);
                }
                sink.flush()
            },
        )?;
        let points = (0..k)
            .map(|e| EpsilonPoint {
                epsilon: self.epsilons[e],
                median_delta_rmse: median(&deltas[e]),
                success_rate: positive_rate(&deltas[e]),
                median_shot_fraction: median(&fractions[e]),
                median_rounds: median(&rounds[e]),
            })
            .collect();
        Ok(StoppingSummary {
            trials: self.run.trials,
            points,
        })
    }
}
