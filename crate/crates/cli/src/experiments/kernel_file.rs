//! Fixed-budget comparison on a user-supplied kernel matrix.

use std::path::PathBuf;

use serde_json::{json, Value};
use shot_alloc::synthetic::load_kernel_file;
use shot_alloc::{Error, Label};

use super::fixed_budget::{run_pair, write_pair, FixedBudgetSummary, PairTally};
use super::{build_problem, trial_seeds, Echo, LearnSettings, RunSettings};
use crate::error::{CliError, CliResult};
use crate::output::RowSink;
use crate::pool::run_ordered;

#[derive(Clone, Debug)]
pub struct LoadKernel {
    pub kernel: PathBuf,
    /// One `+1` / `-1` label per line. Required when the kernel file has no
    /// label column.
    pub labels: Option<PathBuf>,
    pub psd_tol: f64,
    pub sigma_phys: f64,
    pub learn: LearnSettings,
    pub run: RunSettings,
    /// Shots per entry for each budget in the sweep.
    pub nbars: Vec<u64>,
}

pub fn read_labels(path: &PathBuf) -> CliResult<Vec<Label>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let y = match t.parse::<f64>() {
            Ok(v) if v == 1.0 => 1,
            Ok(v) if v == -1.0 => -1,
            _ => {
                return Err(Error::Parse {
                    line: line_no + 1,
                    column: 1,
                    message: format!("label {t:?} is not +1 or -1"),
                }
                .into())
            }
        };
        out.push(y);
    }
    Ok(out)
}

impl LoadKernel {
    /// Checks what can be checked before the kernel file is read. Budget
    /// settings that depend on the matrix size are checked in `run`.
    pub fn validate(&self) -> CliResult<()> {
        if self.nbars.is_empty() {
            return Err(CliError::usage("the budget list is empty"));
        }
        if !(self.sigma_phys >= 0.0 && self.sigma_phys.is_finite()) {
            return Err(CliError::usage(format!(
                "--sigma-phys {} must be finite and >= 0",
                self.sigma_phys
            )));
        }
        if !(self.psd_tol >= 0.0) {
            return Err(CliError::usage(format!(
                "--psd-tol {} must be >= 0",
                self.psd_tol
            )));
        }
        self.run.validate()
    }

    pub fn run(&self, sink: &mut dyn RowSink) -> CliResult<Vec<(u64, FixedBudgetSummary)>> {
        self.validate()?;
        let (k, file_labels) = load_kernel_file::<f64>(&self.kernel, self.psd_tol)?;
        let labels = match (&self.labels, file_labels) {
            (Some(path), _) => read_labels(path)?,
            (None, Some(l)) => l,
            (None, None) => {
                return Err(CliError::usage(
                    "the kernel file has no label column; pass --labels",
                ))
            }
        };
        let n = k.n();
        let base = LearnSettings {
            epsilon: 0.0,
            ..self.learn
        };
        let problem = build_problem(k, labels, self.sigma_phys, &base)?;
        let mut out = Vec::new();
        for &nbar in &self.nbars {
            let learn = LearnSettings { nbar, ..base };
            learn.validate(n)?;
            let echo = Echo::new("load-kernel", n, &learn, self.sigma_phys);
            let mut tally = PairTally::default();
            run_ordered(
                self.run.trials,
                self.run.threads,
                |trial| {
                    let seeds = trial_seeds(self.run.seed, trial);
                    Ok((seeds, run_pair(&problem, &learn, &seeds)?))
                },
                |trial, (seeds, pair)| {
                    write_pair(sink, &echo, trial, seeds.data, &pair)?;
                    tally.add(&pair)
                },
            )?;
            out.push((nbar, tally.summary()));
        }
        Ok(out)
    }
}

pub fn summary_json(results: &[(u64, FixedBudgetSummary)]) -> Value {
    let by_budget: Vec<Value> = results
        .iter()
        .map(|(nbar, s)| json!({ "nbar": nbar, "summary": s.to_json() }))
        .collect();
    json!({ "budgets": by_budget })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::DataSettings;
    use crate::output::Collect;
    use shot_alloc::kernel::write_kernel_csv;

    fn write_fixture(dir: &std::path::Path, with_labels: bool) -> PathBuf {
        let (data, k) = DataSettings {
            n: 10,
            ..DataSettings::default()
        }
        .sample(3)
        .unwrap();
        let path = dir.join("k.csv");
        let labels = with_labels.then_some(data.labels.as_slice());
        let file = std::fs::File::create(&path).unwrap();
        write_kernel_csv(file, &k, labels).unwrap();
        std::fs::write(
            dir.join("y.txt"),
            data.labels
                .iter()
                .map(|y| format!("{y}\n"))
                .collect::<String>(),
        )
        .unwrap();
        path
    }

    fn job(kernel: PathBuf, labels: Option<PathBuf>) -> LoadKernel {
        LoadKernel {
            kernel,
            labels,
            psd_tol: 1e-8,
            sigma_phys: 0.0,
            learn: LearnSettings {
                rounds: 2,
                ..LearnSettings::default()
            },
            run: RunSettings {
                trials: 2,
                seed: 0,
                threads: 1,
            },
            nbars: vec![10, 40],
        }
    }

    #[test]
    fn runs_each_budget() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_fixture(dir.path(), true);
        let mut rows = Collect::default();
        let out = job(path, None).run(&mut rows).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(rows.rows.len(), 2 * 2 * (1 + 3));
    }

    #[test]
    fn labels_can_come_from_a_side_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_fixture(dir.path(), false);
        assert!(matches!(
            job(path.clone(), None).run(&mut Collect::default()),
            Err(CliError::Usage(_))
        ));
        let y = dir.path().join("y.txt");
        assert!(job(path, Some(y)).run(&mut Collect::default()).is_ok());
    }

    #[test]
    fn bad_label_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let y = dir.path().join("bad.txt");
        std::fs::write(&y, "1\n0\n").unwrap();
        assert!(matches!(
            read_labels(&y),
            Err(CliError::Core(Error::Parse { line: 2, .. }))
        ));
    }
}
