use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use shot_alloc_cli::experiments::cost::{self, CostSweep, OperatingPoint, COST_COLUMNS};
use shot_alloc_cli::experiments::fixed_budget::FixedBudget;
use shot_alloc_cli::experiments::kernel_file::{self, LoadKernel};
use shot_alloc_cli::experiments::regime::{RegimeMap, REGIME_COLUMNS};
use shot_alloc_cli::experiments::saturation::Saturation;
use shot_alloc_cli::experiments::stopping::{default_epsilons, StoppingSweep};
use shot_alloc_cli::experiments::theory_variance::{TheoryVariance, THEORY_COLUMNS};
use shot_alloc_cli::experiments::{DataSettings, LearnSettings, RunSettings, STAGE_COLUMNS};
use shot_alloc_cli::{CliResult, Format, RowSink, RowWriter};

/// Simulate kernel SVM training under a finite shot budget and compare
/// uniform with adaptive measurement allocation.
#[derive(Parser, Debug)]
#[command(name = "shot-alloc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Uniform vs adaptive at a matched budget, early stopping off.
    FixedBudget {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Per-round medians of long adaptive runs (default 50 rounds).
    Saturation {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Sweep the dual-stability stopping threshold.
    StoppingSweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        /// Comma-separated thresholds [default: 13 log-spaced values in 1e-2..1]
        #[arg(long, value_delimiter = ',')]
        epsilons: Option<Vec<f64>>,
    },
    /// Mean adaptive improvement over a separation x label-noise grid.
    RegimeMap {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        /// Cluster separations to scan
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,6,8")]
        separations: Vec<f64>,
        /// Label-flip probabilities to scan
        #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.2,0.3")]
        label_noises: Vec<f64>,
    },
    /// Oracle and finite-shot allocation variance vs weight heterogeneity.
    TheoryVariance {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        /// Interpolation points between constant and data weights
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1"
        )]
        t_grid: Vec<f64>,
        /// Monte Carlo replicates per allocation
        #[arg(long, default_value_t = 2000)]
        mc_reps: usize,
    },
    /// Break-even classical/quantum cost ratio over a range of n.
    CostModel {
        /// Operating points as r:R, comma-separated
        #[arg(long, value_delimiter = ',', default_value = "0.16:6")]
        configs: Vec<OperatingPoint>,
        #[arg(long, default_value_t = 10)]
        n_min: usize,
        #[arg(long, default_value_t = 100)]
        n_max: usize,
        /// Shots per entry
        #[arg(long, default_value_t = 100.0)]
        nbar: f64,
        /// Accepted for uniformity with the other commands; the sweep draws
        /// no random numbers
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Accepted for uniformity; the sweep is computed inline
        #[arg(long, default_value_t = 0)]
        threads: usize,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Fixed-budget comparison on a kernel matrix read from CSV.
    LoadKernel {
        #[command(flatten)]
        common: Common,
        /// Kernel CSV (optionally with a leading label row)
        #[arg(long)]
        kernel: PathBuf,
        /// File with one +1/-1 label per line
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Largest tolerated negative eigenvalue magnitude
        #[arg(long, default_value_t = 1e-8)]
        psd_tol: f64,
        /// Comma-separated shots-per-entry budgets [default: --nbar]
        #[arg(long, value_delimiter = ',')]
        nbars: Option<Vec<u64>>,
    },
}

#[derive(Args, Debug)]
struct OutArgs {
    /// Results file; rows go to stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args, Debug)]
struct Common {
    /// Number of training points
    #[arg(long, default_value_t = 50)]
    n: usize,
    /// Independent trials [default: 200, or 5 for theory-variance]
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    trials: Option<u64>,
    /// Shots per independent kernel entry
    #[arg(long, default_value_t = 50)]
    nbar: u64,
    /// Adaptive rounds after the pilot [default: 5, or 50 for saturation and stopping-sweep]
    #[arg(long)]
    rounds: Option<usize>,
    /// Pilot shots per entry
    #[arg(long, default_value_t = 2)]
    m0: u64,
    /// Weight of the active-set instability term in the scores
    #[arg(long, default_value_t = 0.5)]
    lambda: f64,
    /// Dual-stability stopping threshold
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    /// SVM box constraint
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// Hardware noise standard deviation on each kernel entry
    #[arg(long, default_value_t = 0.0)]
    sigma_phys: f64,
    /// Give the learner the hardware noise level
    #[arg(long)]
    sigma_known: bool,
    /// SMO stopping tolerance
    #[arg(long, default_value_t = 1e-6)]
    kkt_tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (0 = one per core); never changes the output
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct DataArgs {
    #[arg(long, default_value_t = 6.0)]
    separation: f64,
    #[arg(long, default_value_t = 1.0)]
    noise_scale: f64,
    /// Stretch factor of the last axis
    #[arg(long, default_value_t = 1.0)]
    anisotropy: f64,
    /// Probability of flipping each label
    #[arg(long, default_value_t = 0.0)]
    label_noise: f64,
    #[arg(long, default_value_t = 2)]
    dims: usize,
    /// RBF bandwidth [default: 1 / (dims * pooled variance)]
    #[arg(long)]
    gamma: Option<f64>,
}

impl Common {
    fn learn(&self, default_rounds: usize) -> LearnSettings {
        LearnSettings {
            nbar: self.nbar,
            rounds: self.rounds.unwrap_or(default_rounds),
            m0: self.m0,
            lambda: self.lambda,
            epsilon: self.epsilon,
            c: self.c,
            kkt_tol: self.kkt_tol,
            sigma_known: self.sigma_known,
        }
    }

    fn run(&self, default_trials: usize) -> RunSettings {
        RunSettings {
            trials: self.trials.map_or(default_trials, |t| t as usize),
            seed: self.seed,
            threads: self.threads,
        }
    }

    fn data(&self, d: &DataArgs) -> DataSettings {
        DataSettings {
            n: self.n,
            separation: d.separation,
            noise_scale: d.noise_scale,
            anisotropy: d.anisotropy,
            label_noise: d.label_noise,
            dims: d.dims,
            gamma: d.gamma,
            sigma_phys: self.sigma_phys,
        }
    }
}

/// Opens the row writer for `out`, runs `job`, and writes its summary next
/// to the results as `<out>.summary.json` (or to stderr).
fn emit<F>(out: &OutArgs, columns: &'static [&'static str], job: F) -> CliResult<()>
where
    F: FnOnce(&mut dyn RowSink) -> CliResult<Value>,
{
    let target: Box<dyn Write> = match &out.out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    let mut writer = RowWriter::new(target, out.format, columns)?;
    let result = job(&mut writer);
    // Rows from completed trials are kept even when the job failed.
    writer.flush()?;
    let summary = serde_json::to_string_pretty(&result?)?;
    match &out.out {
        Some(path) => std::fs::write(summary_path(path), summary + "\n")?,
        None => eprintln!("{summary}"),
    }
    Ok(())
}

fn summary_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".summary.json");
    out.with_file_name(name)
}

fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::FixedBudget { common, data } => {
            let job = FixedBudget {
                data: common.data(&data),
                learn: common.learn(5),
                run: common.run(200),
            };
            job.validate()?;
            emit(&common.out, STAGE_COLUMNS, |sink| {
                Ok(job.run(sink)?.to_json())
            })
        }
        Command::Saturation { common, data } => {
            let job = Saturation {
                data: common.data(&data),
                learn: common.learn(50),
                run: common.run(200),
            };
            job.validate()?;
            emit(&common.out, STAGE_COLUMNS, |sink| {
                Ok(job.run(sink)?.to_json())
            })
        }
        Command::StoppingSweep {
            common,
            data,
            epsilons,
        } => {
            let job = StoppingSweep {
                data: common.data(&data),
                learn: common.learn(50),
                run: common.run(200),
                epsilons: epsilons.unwrap_or_else(default_epsilons),
            };
            job.validate()?;
            emit(&common.out, STAGE_COLUMNS, |sink| {
                Ok(job.run(sink)?.to_json())
            })
        }
        Command::RegimeMap {
            common,
            data,
            separations,
            label_noises,
        } => {
            let job = RegimeMap {
                data: common.data(&data),
                learn: common.learn(5),
                run: common.run(200),
                separations,
                label_noises,
            };
            job.validate()?;
            emit(&common.out, REGIME_COLUMNS, |sink| {
                Ok(job.run(sink)?.to_json())
            })
        }
        Command::TheoryVariance {
            common,
            data,
            t_grid,
            mc_reps,
        } => {
            let job = TheoryVariance {
                data: common.data(&data),
                learn: common.learn(5),
                run: common.run(5),
                t_grid,
                mc_reps,
            };
            job.validate()?;
            emit(&common.out, THEORY_COLUMNS, |sink| {
                Ok(job.run(sink)?.to_json())
            })
        }
        Command::CostModel {
            configs,
            n_min,
            n_max,
            nbar,
            out,
            ..
        } => {
            let job = CostSweep {
                configs,
                n_min,
                n_max,
                nbar,
            };
            job.validate()?;
            emit(&out, COST_COLUMNS, |sink| {
                Ok(cost::summary_json(&job.run(sink)?))
            })
        }
        Command::LoadKernel {
            common,
            kernel,
            labels,
            psd_tol,
            nbars,
        } => {
            let job = LoadKernel {
                kernel,
                labels,
                psd_tol,
                sigma_phys: common.sigma_phys,
                learn: common.learn(5),
                run: common.run(200),
                nbars: nbars.unwrap_or_else(|| vec![common.nbar]),
            };
            job.validate()?;
            emit(&common.out, STAGE_COLUMNS, |sink| {
                Ok(kernel_file::summary_json(&job.run(sink)?))
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
