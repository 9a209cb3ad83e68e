//! Break-even cost ratio over problem sizes.

use serde_json::{json, Value};
use shot_alloc::theory::{tau_critical, CostModel};

use crate::error::{CliError, CliResult};
use crate::output::{Field, RowSink};

/// An adaptive operating point: the fraction of the budget it spends and
/// the number of rounds it takes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OperatingPoint {
    pub r: f64,
    pub rounds: usize,
}

impl std::str::FromStr for OperatingPoint {
    type Err = String;

    /// Parses `r:R`, for example `0.16:6`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (r, rounds) = s
            .split_once(':')
            .ok_or_else(|| format!("expected r:R, got {s:?}"))?;
        let r: f64 = r
            .trim()
            .parse()
            .map_err(|e| format!("bad r in {s:?}: {e}"))?;
        let rounds: usize = rounds
            .trim()
            .parse()
            .map_err(|e| format!("bad R in {s:?}: {e}"))?;
        Ok(Self { r, rounds })
    }
}

#[derive(Clone, Debug)]
pub struct CostSweep {
    pub configs: Vec<OperatingPoint>,
    pub n_min: usize,
    pub n_max: usize,
    pub nbar: f64,
}

impl Default for CostSweep {
    fn default() -> Self {
        Self {
            configs: vec![OperatingPoint { r: 0.16, rounds: 6 }],
            n_min: 10,
            n_max: 100,
            nbar: 100.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostPoint {
    pub r: f64,
    pub rounds: usize,
    pub n: usize,
    pub tau_star: f64,
}

pub const COST_COLUMNS: &[&str] = &[
    "experiment",
    "r",
    "rounds",
    "n",
    "nbar",
    "n_tot",
    "tau_star",
];

impl CostSweep {
    pub fn validate(&self) -> CliResult<()> {
        if self.configs.is_empty() {
            return Err(CliError::usage("no r:R configurations given"));
        }
        for c in &self.configs {
            if c.rounds == 0 {
                return Err(CliError::usage(format!(
                    "configuration {}:0 has no rounds",
                    c.r
                )));
            }
            if !(0.0..=1.0).contains(&c.r) {
                return Err(CliError::usage(format!("r = {} is outside [0, 1]", c.r)));
            }
        }
        if self.n_min < 2 || self.n_max < self.n_min {
            return Err(CliError::usage(format!(
                "invalid n range {}..={}",
                self.n_min, self.n_max
            )));
        }
        if !(self.nbar > 0.0) {
            return Err(CliError::usage("--nbar must be positive"));
        }
        Ok(())
    }

    pub fn run(&self, sink: &mut dyn RowSink) -> CliResult<Vec<CostPoint>> {
        self.validate()?;
        let mut out = Vec::new();
        for c in &self.configs {
            for n in self.n_min..=self.n_max {
                let model = CostModel {
                    c_q: 1.0,
                    c_c: 1.0,
                    rounds: c.rounds,
                    r: c.r,
                    n,
                    n_bar: self.nbar,
                };
                let tau_star = tau_critical(&model)?;
                sink.push(vec![
                    Field::text("cost-model"),
                    Field::Float(c.r),
                    Field::UInt(c.rounds as u64),
                    Field::UInt(n as u64),
                    Field::Float(self.nbar),
                    Field::Float(model.n_tot()),
                    Field::Float(tau_star),
                ])?;
                out.push(CostPoint {
                    r: c.r,
                    rounds: c.rounds,
                    n,
                    tau_star,
                });
            }
            sink.flush()?;
        }
        Ok(out)
    }
}

pub fn summary_json(points: &[CostPoint]) -> Value {
    json!({
        "rows": points.len(),
        "max_tau_star": points.iter().map(|p| p.tau_star).fold(f64::NEG_INFINITY, f64::max),
        "min_tau_star": points.iter().map(|p| p.tau_star).fold(f64::INFINITY, f64::min),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::output::Collect;

    #[test]
    fn default_sweep() {
        let mut rows = Collect::default();
        let pts = CostSweep::default().run(&mut rows).unwrap();
        assert_eq!(pts.len(), 91);
        assert_eq!(rows.rows.len(), 91);
        let at50 = pts.iter().find(|p| p.n == 50).unwrap();
        assert!((at50.tau_star - 0.1372).abs() < 1e-4);
        assert!(pts.iter().all(|p| p.tau_star > 0.0));
    }

    #[test]
    fn zero_rounds_is_rejected() {
        let sweep = CostSweep {
            configs: vec!["0.16:6".parse().unwrap(), "0.3:0".parse().unwrap()],
            ..CostSweep::default()
        };
        assert!(matches!(
            sweep.run(&mut Collect::default()),
            Err(CliError::Usage(_))
        ));
        assert!("0.2".parse::<OperatingPoint>().is_err());
    }
}
