//! Uniform versus adaptive allocation at a matched budget, with early
//! stopping disabled.

use serde_json::{json, Value};
use shot_alloc::adaptive::{run_adaptive, run_uniform, Problem, RunTrace};
use shot_alloc::metrics::{relative_improvement, MetricBundle};

use super::{
    build_problem, rng_from, stage_row, trial_seeds, DataSettings, Echo, LearnSettings,
    MetricMedians, RunSettings, TrialSeeds,
};
use crate::error::CliResult;
use crate::output::RowSink;
use crate::pool::run_ordered;
use crate::stats::{median, positive_rate};

#[derive(Clone, Debug, Default)]
pub struct FixedBudget {
    pub data: DataSettings,
    pub learn: LearnSettings,
    pub run: RunSettings,
}

/// Both strategies run on the same problem.
#[derive(Clone, Debug)]
pub struct PairOutcome {
    pub uniform: RunTrace<f64>,
    pub adaptive: RunTrace<f64>,
}

impl PairOutcome {
    /// Relative decision-function improvement of adaptive over uniform.
    pub fn delta_rmse(&self) -> CliResult<f64> {
        Ok(relative_improvement(
            self.uniform.final_record().metrics.rmse_f_normalized,
            self.adaptive.final_record().metrics.rmse_f_normalized,
        )?)
    }
}

pub fn run_pair(
    problem: &Problem<f64>,
    learn: &LearnSettings,
    seeds: &TrialSeeds,
) -> CliResult<PairOutcome> {
    let n = problem.n();
    let uniform = run_uniform(
        problem,
        &learn.adaptive_config(n, seeds.uniform),
        &mut rng_from(seeds.uniform),
    )?;
    let adaptive = run_adaptive(
        problem,
        &learn.adaptive_config(n, seeds.adaptive),
        &mut rng_from(seeds.adaptive),
    )?;
    Ok(PairOutcome { uniform, adaptive })
}

/// Writes the uniform row and every adaptive stage row of one trial.
pub fn write_pair(
    sink: &mut dyn RowSink,
    echo: &Echo,
    trial: usize,
    trial_seed: u64,
    pair: &PairOutcome,
) -> CliResult<()> {
    sink.push(stage_row(
        echo,
        trial,
        trial_seed,
        "uniform",
        &pair.uniform,
        pair.uniform.final_record(),
    ))?;
    for rec in &pair.adaptive.records {
        sink.push(stage_row(
            echo,
            trial,
            trial_seed,
            "adaptive",
            &pair.adaptive,
            rec,
        ))?;
    }
    sink.flush()
}

#[derive(Clone, Debug, PartialEq)]
pub struct FixedBudgetSummary {
    pub trials: usize,
    /// The baseline lines: medians of the uniform runs.
    pub uniform: MetricMedians,
    /// Medians of the final adaptive stage.
    pub adaptive: MetricMedians,
    /// Adaptive medians at each stage, pilot first.
    pub adaptive_by_stage: Vec<MetricMedians>,
    pub median_delta_rmse: f64,
    /// Fraction of trials where adaptive beat uniform on decision RMSE.
    pub success_rate: f64,
}

impl FixedBudgetSummary {
    pub fn to_json(&self) -> Value {
        json!({
            "trials": self.trials,
            "uniform": self.uniform.to_json(),
            "adaptive": self.adaptive.to_json(),
            "adaptive_by_stage": self.adaptive_by_stage.iter().map(MetricMedians::to_json).collect::<Vec<_>>(),
            "median_delta_rmse": self.median_delta_rmse,
            "success_rate": self.success_rate,
        })
    }
}

/// Gathers per-trial outcomes into a [`FixedBudgetSummary`].
#[derive(Default)]
pub struct PairTally {
    uniform: Vec<MetricBundle<f64>>,
    by_stage: Vec<Vec<MetricBundle<f64>>>,
    deltas: Vec<f64>,
}

impl PairTally {
    pub fn add(&mut self, pair: &PairOutcome) -> CliResult<()> {
        self.uniform.push(pair.uniform.final_record().metrics);
        for (k, rec) in pair.adaptive.records.iter().enumerate() {
            if self.by_stage.len() <= k {
                self.by_stage.push(Vec::new());
            }
            self.by_stage[k].push(rec.metrics);
        }
        self.deltas.push(pair.delta_rmse()?);
        Ok(())
    }

    pub fn summary(&self) -> FixedBudgetSummary {
        let adaptive_by_stage: Vec<MetricMedians> =
            self.by_stage.iter().map(|b| MetricMedians::of(b)).collect();
        FixedBudgetSummary {
            trials: self.uniform.len(),
            uniform: MetricMedians::of(&self.uniform),
            adaptive: *adaptive_by_stage.last().expect("at least one trial"),
            adaptive_by_stage,
            median_delta_rmse: median(&self.deltas),
            success_rate: positive_rate(&self.deltas),
        }
    }
}

impl FixedBudget {
    /// The learner settings actually used: early stopping is always off.
    pub fn learn(&self) -> LearnSettings {
        LearnSettings {
            epsilon: 0.0,
            ..self.learn
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        self.data.validate()?;
        self.learn().validate(self.data.n)?;
        self.run.validate()
    }

    pub fn run(&self, sink: &mut dyn RowSink) -> CliResult<FixedBudgetSummary> {
        self.validate()?;
        let learn = self.learn();
        let echo = Echo::new("fixed-budget", self.data.n, &learn, self.data.sigma_phys);
        let mut tally = PairTally::default();
        run_ordered(
            self.run.trials,
            self.run.threads,
            |trial| {
                let seeds = trial_seeds(self.run.seed, trial);
                let (data, k) = self.data.sample(seeds.data)?;
                let problem = build_problem(k, data.labels, self.data.sigma_phys, &learn)?;
                Ok((seeds, run_pair(&problem, &learn, &seeds)?))
            },
            |trial, (seeds, pair)| {
                write_pair(sink, &echo, trial, seeds.data, &pair)?;
                tally.add(&pair)
            },
        )?;
        Ok(tally.summary())
    }
}
