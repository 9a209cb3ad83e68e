//! Grid over dataset structure: where does adaptive allocation pay off?

use serde_json::{json, Value};
use shot_alloc::metrics::gini;

use super::fixed_budget::run_pair;
use super::{build_problem, trial_seeds, DataSettings, LearnSettings, RunSettings};
use crate::error::{CliError, CliResult};
use crate::output::{Field, RowSink};
use crate::pool::run_ordered;
use crate::stats::{mean, median, positive_rate, quantile, ranks};

#[derive(Clone, Debug)]
pub struct RegimeMap {
    /// Base dataset settings; separation and label noise come from the grid.
    pub data: DataSettings,
    pub learn: LearnSettings,
    pub run: RunSettings,
    pub separations: Vec<f64>,
    pub label_noises: Vec<f64>,
}

impl Default for RegimeMap {
    fn default() -> Self {
        Self {
            data: DataSettings::default(),
            learn: LearnSettings::default(),
            run: RunSettings::default(),
            separations: vec![1.0, 2.0, 3.0, 4.0, 6.0, 8.0],
            label_noises: vec![0.0, 0.1, 0.2, 0.3],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cell {
    pub separation: f64,
    pub label_noise: f64,
    pub margin_strength: f64,
    /// Mean Gini coefficient of the true-kernel dual vector.
    pub gini: f64,
    pub mean_delta_rmse: f64,
    pub median_delta_rmse: f64,
    pub success_rate: f64,
}

/// Cells in the top and bottom quartiles of both structure axes.
#[derive(Clone, Debug, PartialEq)]
pub struct RegimeSplit {
    pub high: Vec<usize>,
    pub low: Vec<usize>,
    /// Set when a joint quartile was empty and the split fell back to the
    /// sum of the two ranks.
    pub by_combined_rank: bool,
    pub high_mean_delta: f64,
    pub low_mean_delta: f64,
}

impl RegimeSplit {
    pub fn of(cells: &[Cell]) -> Self {
        let g: Vec<f64> = cells.iter().map(|c| c.gini).collect();
        let m: Vec<f64> = cells.iter().map(|c| c.margin_strength).collect();
        let pick = |keep: &dyn Fn(usize) -> bool| {
            (0..cells.len()).filter(|&k| keep(k)).collect::<Vec<_>>()
        };
        let (g3, g1, m3, m1) = (
            quantile(&g, 0.75),
            quantile(&g, 0.25),
            quantile(&m, 0.75),
            quantile(&m, 0.25),
        );
        let mut high = pick(&|k| g[k] >= g3 && m[k] >= m3);
        let mut low = pick(&|k| g[k] <= g1 && m[k] <= m1);
        let fallback = high.is_empty() || low.is_empty();
        if fallback {
            let rg = ranks(&g);
            let rm = ranks(&m);
            let combined: Vec<f64> = rg.iter().zip(&rm).map(|(a, b)| a + b).collect();
            let (c3, c1) = (quantile(&combined, 0.75), quantile(&combined, 0.25));
            high = pick(&|k| combined[k] >= c3);
            low = pick(&|k| combined[k] <= c1);
        }
        let avg = |set: &[usize]| {
            mean(
                &set.iter()
                    .map(|&k| cells[k].mean_delta_rmse)
                    .collect::<Vec<_>>(),
            )
        };
        Self {
            high_mean_delta: avg(&high),
            low_mean_delta: avg(&low),
            high,
            low,
            by_combined_rank: fallback,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegimeSummary {
    pub trials: usize,
    pub cells: Vec<Cell>,
    pub split: RegimeSplit,
}

impl RegimeSummary {
    /// Whether some low-structure cell shows no adaptive advantage.
    pub fn low_has_nonpositive(&self) -> bool {
        self.split
            .low
            .iter()
            .any(|&k| self.cells[k].mean_delta_rmse <= 0.0)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "trials": self.trials,
            "high_cells": self.split.high,
            "low_cells": self.split.low,
            "split_by_combined_rank": self.split.by_combined_rank,
            "high_mean_delta_rmse": self.split.high_mean_delta,
            "low_mean_delta_rmse": self.split.low_mean_delta,
            "low_has_nonpositive": self.low_has_nonpositive(),
        })
    }
}

pub const REGIME_COLUMNS: &[&str] = &[
    "experiment",
    "cell",
    "separation",
    "label_noise",
    "noise_scale",
    "dims",
    "margin_strength",
    "gini",
    "mean_delta_rmse",
    "median_delta_rmse",
    "success_rate",
    "trials",
    "n",
    "n_tot",
    "rounds",
    "lambda",
    "c",
    "sigma_phys",
];

impl RegimeMap {
    pub fn validate(&self) -> CliResult<()> {
        if self.separations.is_empty() || self.label_noises.is_empty() {
            return Err(CliError::usage("both grid axes need at least one value"));
        }
        for cell in self.grid() {
            cell.validate()?;
        }
        self.learn.validate(self.data.n)?;
        self.run.validate()
    }

    fn grid(&self) -> Vec<DataSettings> {
        let mut out = Vec::new();
        for &separation in &self.separations {
            for &label_noise in &self.label_noises {
                out.push(DataSettings {
                    separation,
                    label_noise,
                    ..self.data.clone()
                });
            }
        }
        out
    }

    /// Trial `t` uses the same seeds in every cell, so cells differ only in
    /// their parameters.
    pub fn run(&self, sink: &mut dyn RowSink) -> CliResult<RegimeSummary> {
        self.validate()?;
        let learn = LearnSettings {
            epsilon: 0.0,
            ..self.learn
        };
        let mut cells = Vec::new();
        for (index, data) in self.grid().into_iter().enumerate() {
            let mut deltas = Vec::new();
            let mut ginis = Vec::new();
            run_ordered(
                self.run.trials,
                self.run.threads,
                |trial| {
                    let seeds = trial_seeds(self.run.seed, trial);
                    let (set, k) = data.sample(seeds.data)?;
                    let problem = build_problem(k, set.labels, data.sigma_phys, &learn)?;
                    let g = gini(problem.reference.model.alpha())?;
                    Ok((g, run_pair(&problem, &learn, &seeds)?.delta_rmse()?))
                },
                |_, (g, d)| {
                    ginis.push(g);
                    deltas.push(d);
                    Ok(())
                },
            )?;
            let spec = data.blob_spec(0);
            let cell = Cell {
                separation: data.separation,
                label_noise: data.label_noise,
                margin_strength: spec.margin_strength(),
                gini: mean(&ginis),
                mean_delta_rmse: mean(&deltas),
                median_delta_rmse: median(&deltas),
                success_rate: positive_rate(&deltas),
            };
            sink.push(vec![
                Field::text("regime-map"),
                Field::UInt(index as u64),
                Field::Float(cell.separation),
                Field::Float(cell.label_noise),
                Field::Float(data.noise_scale),
                Field::UInt(data.dims as u64),
                Field::Float(cell.margin_strength),
                Field::Float(cell.gini),
                Field::Float(cell.mean_delta_rmse),
                Field::Float(cell.median_delta_rmse),
                Field::Float(cell.success_rate),
                Field::UInt(self.run.trials as u64),
                Field::UInt(data.n as u64),
                Field::UInt(learn.n_tot(data.n)),
                Field::UInt(learn.rounds as u64),
                Field::Float(learn.lambda),
                Field::Float(learn.c),
                Field::Float(data.sigma_phys),
            ])?;
            sink.flush()?;
            cells.push(cell);
        }
        Ok(RegimeSummary {
            trials: self.run.trials,
            split: RegimeSplit::of(&cells),
            cells,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::output::Collect;

    fn cell(gini: f64, margin_strength: f64, mean_delta_rmse: f64) -> Cell {
        Cell {
            separation: 0.0,
            label_noise: 0.0,
            margin_strength,
            gini,
            mean_delta_rmse,
            median_delta_rmse: mean_delta_rmse,
            success_rate: 0.0,
        }
    }

    #[test]
    fn split_takes_joint_quartiles() {
        let cells = vec![
            cell(0.1, 1.0, -0.2),
            cell(0.2, 2.0, 0.0),
            cell(0.3, 3.0, 0.1),
            cell(0.4, 4.0, 0.3),
            cell(0.5, 5.0, 0.5),
        ];
        let s = RegimeSplit::of(&cells);
        assert_eq!(s.high, vec![3, 4]);
        assert_eq!(s.low, vec![0, 1]);
        assert!(!s.by_combined_rank);
        assert!((s.high_mean_delta - 0.4).abs() < 1e-15);
        assert!((s.low_mean_delta + 0.1).abs() < 1e-15);
    }

    #[test]
    fn split_falls_back_when_axes_disagree() {
        let cells = vec![
            cell(0.9, 1.0, 0.0),
            cell(0.1, 9.0, 0.0),
            cell(0.5, 5.0, 0.0),
        ];
        let s = RegimeSplit::of(&cells);
        assert!(s.by_combined_rank);
        assert!(!s.high.is_empty() && !s.low.is_empty());
    }

    #[test]
    fn three_by_three_grid_gives_nine_rows() {
        let cfg = RegimeMap {
            data: DataSettings {
                n: 12,
                ..DataSettings::default()
            },
            learn: LearnSettings {
                nbar: 20,
                rounds: 2,
                ..LearnSettings::default()
            },
            run: RunSettings {
                trials: 5,
                seed: 1,
                threads: 1,
            },
            separations: vec![2.0, 4.0, 6.0],
            label_noises: vec![0.0, 0.1, 0.2],
        };
        let mut rows = Collect::default();
        let s = cfg.run(&mut rows).unwrap();
        assert_eq!(rows.rows.len(), 9);
        assert!(s.cells.iter().all(|c| (0.0..1.0).contains(&c.gini)));
    }
}
