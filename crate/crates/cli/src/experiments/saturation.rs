//! Per-round behaviour of long adaptive runs.

use serde_json::{json, Value};
use shot_alloc::adaptive::run_adaptive;

use super::{
    build_problem, rng_from, stage_row, trial_seeds, DataSettings, Echo, LearnSettings, RunSettings,
};
use crate::error::CliResult;
use crate::output::RowSink;
use crate::pool::run_ordered;
use crate::stats::{median, spearman};

#[derive(Clone, Debug)]
pub struct Saturation {
    pub data: DataSettings,
    pub learn: LearnSettings,
    pub run: RunSettings,
}

impl Default for Saturation {
    fn default() -> Self {
        Self {
            data: DataSettings::default(),
            learn: LearnSettings {
                rounds: 50,
                ..LearnSettings::default()
            },
            run: RunSettings::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SaturationSummary {
    pub trials: usize,
    /// Median decision RMSE at each stage, pilot first. Later stages only
    /// count the trials that reached them.
    pub median_rmse: Vec<f64>,
    /// Median dual-stability change per round; entry 0 is the pilot and
    /// has none.
    pub median_delta: Vec<Option<f64>>,
    pub final_not_worse_than_pilot: bool,
    /// Stages whose median RMSE rose above the previous stage.
    pub increases: usize,
    /// Largest such rise, relative to the pilot median.
    pub max_increase_rel_pilot: f64,
    /// Spearman correlation between the median change `delta_r` and the
    /// median RMSE improvement `rmse_{r-1} - rmse_r` over rounds `r >= 1`.
    pub delta_improvement_spearman: f64,
}

impl SaturationSummary {
    fn from_stages(trials: usize, rmse: &[Vec<f64>], delta: &[Vec<f64>]) -> Self {
        let median_rmse: Vec<f64> = rmse.iter().map(|v| median(v)).collect();
        let median_delta: Vec<Option<f64>> = delta
            .iter()
            .map(|v| (!v.is_empty()).then(|| median(v)))
            .collect();
        let pilot = median_rmse[0];
        let mut increases = 0;
        let mut max_rise = 0.0f64;
        for w in median_rmse.windows(2) {
            if w[1] > w[0] {
                increases += 1;
                max_rise = max_rise.max((w[1] - w[0]) / pilot);
            }
        }
        let (mut ds, mut gains) = (Vec::new(), Vec::new());
        for r in 1..median_rmse.len() {
            if let Some(d) = median_delta[r] {
                ds.push(d);
                gains.push(median_rmse[r - 1] - median_rmse[r]);
            }
        }
        let rho = if ds.len() >= 2 {
            spearman(&ds, &gains)
        } else {
            f64::NAN
        };
        Self {
            trials,
            final_not_worse_than_pilot: *median_rmse.last().unwrap() <= pilot,
            median_rmse,
            median_delta,
            increases,
            max_increase_rel_pilot: max_rise,
            delta_improvement_spearman: rho,
        }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "trials": self.trials,
            "median_decision_rmse": self.median_rmse,
            "median_delta": self.median_delta,
            "final_not_worse_than_pilot": self.final_not_worse_than_pilot,
            "increases": self.increases,
            "max_increase_rel_pilot": self.max_increase_rel_pilot,
            "delta_improvement_spearman": self.delta_improvement_spearman,
        })
    }
}

impl Saturation {
    pub fn validate(&self) -> CliResult<()> {
        self.data.validate()?;
        self.learn.validate(self.data.n)?;
        self.run.validate()
    }

    pub fn run(&self, sink: &mut dyn RowSink) -> CliResult<SaturationSummary> {
        self.validate()?;
        let echo = Echo::new("saturation", self.data.n, &self.learn, self.data.sigma_phys);
        let stages = self.learn.rounds + 1;
        let mut rmse = vec![Vec::new(); stages];
        let mut delta = vec![Vec::new(); stages];
        run_ordered(
            self.run.trials,
            self.run.threads,
            |trial| {
                let seeds = trial_seeds(self.run.seed, trial);
                let (data, k) = self.data.sample(seeds.data)?;
                let problem = build_problem(k, data.labels, self.data.sigma_phys, &self.learn)?;
                let config = self.learn.adaptive_config(problem.n(), seeds.adaptive);
                let trace = run_adaptive(&problem, &config, &mut rng_from(seeds.adaptive))?;
                Ok((seeds, trace))
            },
            |trial, (seeds, trace)| {
                for rec in &trace.records {
                    sink.push(stage_row(&echo, trial, seeds.data, "adaptive", &trace, rec))?;
                    rmse[rec.round].push(rec.metrics.rmse_f_normalized);
                    if let Some(d) = rec.delta {
                        delta[rec.round].push(d);
                    }
                }
                sink.flush()
            },
        )?;
        Ok(SaturationSummary::from_stages(
            self.run.trials,
            &rmse,
            &delta,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_counts_rises() {
        let rmse = vec![vec![1.0], vec![0.5], vec![0.52], vec![0.4]];
        let delta = vec![vec![], vec![0.9], vec![0.1], vec![0.3]];
        let s = SaturationSummary::from_stages(1, &rmse, &delta);
        assert_eq!(s.increases, 1);
        assert!((s.max_increase_rel_pilot - 0.02).abs() < 1e-12);
        assert!(s.final_not_worse_than_pilot);
        assert!((s.delta_improvement_spearman - 1.0).abs() < 1e-12);
        assert_eq!(s.median_delta[0], None);
    }
}
