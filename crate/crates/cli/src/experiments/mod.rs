//! The experiment families and the plumbing they share.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use shot_alloc::adaptive::{Problem, RoundRecord, RunTrace};
use shot_alloc::measurement::NoiseModel;
use shot_alloc::metrics::MetricBundle;
use shot_alloc::svm::SolverOptions;
use shot_alloc::synthetic::{default_gamma, make_blobs, rbf_kernel, BlobSpec, Dataset};
use shot_alloc::tri::num_pairs;
use shot_alloc::{AdaptiveConfigF64, KernelMatrixF64, Label};

use crate::error::{CliError, CliResult};
use crate::output::{json_float_array, Field};
use crate::stats::median;

pub mod cost;
pub mod fixed_budget;
pub mod kernel_file;
pub mod regime;
pub mod saturation;
pub mod stopping;
pub mod theory_variance;

/// How synthetic datasets and the hardware noise are generated.
#[derive(Clone, Debug, PartialEq)]
pub struct DataSettings {
    pub n: usize,
    pub separation: f64,
    pub noise_scale: f64,
    pub anisotropy: f64,
    pub label_noise: f64,
    pub dims: usize,
    /// RBF bandwidth; `None` uses the pooled-variance heuristic.
    pub gamma: Option<f64>,
    pub sigma_phys: f64,
}

impl Default for DataSettings {
    fn default() -> Self {
        let blobs = BlobSpec::default();
        Self {
            n: blobs.n_points,
            separation: blobs.separation,
            noise_scale: blobs.noise_scale,
            anisotropy: blobs.anisotropy,
            label_noise: blobs.label_noise,
            dims: blobs.dims,
            gamma: None,
            sigma_phys: 0.0,
        }
    }
}

impl DataSettings {
    pub fn blob_spec(&self, seed: u64) -> BlobSpec {
        BlobSpec {
            n_points: self.n,
            separation: self.separation,
            noise_scale: self.noise_scale,
            anisotropy: self.anisotropy,
            label_noise: self.label_noise,
            dims: self.dims,
            seed,
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.n < 4 {
            return Err(CliError::usage(format!(
                "--n must be at least 4, got {}",
                self.n
            )));
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(CliError::usage(format!(
                    "--gamma must be positive, got {g}"
                )));
            }
        }
        if !(self.sigma_phys >= 0.0 && self.sigma_phys.is_finite()) {
            return Err(CliError::usage(format!(
                "--sigma-phys must be >= 0, got {}",
                self.sigma_phys
            )));
        }
        // BlobSpec owns the remaining range checks.
        make_blobs::<f64>(&self.blob_spec(0))
            .map(|_| ())
            .map_err(|e| CliError::usage(e.to_string()))
    }

    /// Samples a dataset and builds its true RBF kernel.
    pub fn sample(&self, seed: u64) -> CliResult<(Dataset<f64>, KernelMatrixF64)> {
        let data = make_blobs::<f64>(&self.blob_spec(seed))?;
        let gamma = match self.gamma {
            Some(g) => g,
            None => default_gamma(&data.points)?,
        };
        let k = rbf_kernel(&data.points, gamma)?;
        Ok((data, k))
    }
}

/// Learner and budget settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LearnSettings {
    /// Shots per independent entry; `N_tot = nbar * n (n - 1) / 2`.
    pub nbar: u64,
    pub rounds: usize,
    pub m0: u64,
    pub lambda: f64,
    pub epsilon: f64,
    pub c: f64,
    pub kkt_tol: f64,
    pub sigma_known: bool,
}

impl Default for LearnSettings {
    fn default() -> Self {
        let d = AdaptiveConfigF64::default();
        Self {
            nbar: 50,
            rounds: d.rounds,
            m0: d.m0,
            lambda: d.lambda,
            epsilon: d.epsilon,
            c: d.c,
            kkt_tol: d.kkt_tol,
            sigma_known: d.sigma_known,
        }
    }
}

impl LearnSettings {
    pub fn n_tot(&self, n: usize) -> u64 {
        self.nbar * num_pairs(n) as u64
    }

    pub fn adaptive_config(&self, n: usize, seed: u64) -> AdaptiveConfigF64 {
        AdaptiveConfigF64 {
            n_tot: self.n_tot(n),
            rounds: self.rounds,
            m0: self.m0,
            lambda: self.lambda,
            epsilon: self.epsilon,
            c: self.c,
            kkt_tol: self.kkt_tol,
            seed,
            sigma_known: self.sigma_known,
        }
    }

    pub fn solver(&self) -> SolverOptions<f64> {
        SolverOptions::with_tol(self.kkt_tol)
    }

    pub fn validate(&self, n: usize) -> CliResult<()> {
        if self.nbar == 0 {
            return Err(CliError::usage("--nbar must be at least 1"));
        }
        self.adaptive_config(n, 0)
            .validate(n)
            .map_err(|e| CliError::usage(e.to_string()))
    }
}

/// Trial count, master seed, and worker count.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunSettings {
    pub trials: usize,
    pub seed: u64,
    /// 0 means one worker per core.
    pub threads: usize,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            trials: 200,
            seed: 0,
            threads: 0,
        }
    }
}

impl RunSettings {
    pub fn validate(&self) -> CliResult<()> {
        if self.trials == 0 {
            return Err(CliError::usage("--trials must be at least 1"));
        }
        Ok(())
    }
}

/// Seeds for the independent random parts of one trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrialSeeds {
    pub data: u64,
    pub uniform: u64,
    pub adaptive: u64,
}

/// Trial `t` reads stream `t` of the master ChaCha generator, so its seeds
/// depend only on `(seed, t)` and never on scheduling.
pub fn trial_seeds(seed: u64, trial: usize) -> TrialSeeds {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    TrialSeeds {
        data: rng.next_u64(),
        uniform: rng.next_u64(),
        adaptive: rng.next_u64(),
    }
}

pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Builds the ground-truth problem for a kernel and its labels.
pub fn build_problem(
    k: KernelMatrixF64,
    labels: Vec<Label>,
    sigma_phys: f64,
    learn: &LearnSettings,
) -> CliResult<Problem<f64>> {
    let n = k.n();
    let noise = NoiseModel::uniform(n, sigma_phys)?;
    Ok(Problem::new(k, labels, noise, learn.c, learn.solver())?)
}

/// Configuration echoed into every stage row.
#[derive(Clone, Debug)]
pub struct Echo {
    pub experiment: &'static str,
    pub n: usize,
    pub n_tot: u64,
    pub rounds: usize,
    pub lambda: f64,
    pub epsilon: f64,
    pub c: f64,
    pub sigma_phys: f64,
}

impl Echo {
    pub fn new(experiment: &'static str, n: usize, learn: &LearnSettings, sigma_phys: f64) -> Self {
        Self {
            experiment,
            n,
            n_tot: learn.n_tot(n),
            rounds: learn.rounds,
            lambda: learn.lambda,
            epsilon: learn.epsilon,
            c: learn.c,
            sigma_phys,
        }
    }
}

pub const STAGE_COLUMNS: &[&str] = &[
    "experiment",
    "trial",
    "trial_seed",
    "n",
    "n_tot",
    "rounds",
    "lambda",
    "epsilon",
    "c",
    "sigma_phys",
    "strategy",
    "stage",
    "stage_shots",
    "cumulative_shots",
    "rmse_k",
    "rmse_k_sv",
    "jaccard",
    "weighted_jaccard",
    "rel_margin_err",
    "decision_rmse",
    "delta",
    "uniform_fallback",
    "shot_fraction",
    "rounds_executed",
    "stopped_early",
    "delta_series",
];

/// One row for `record`, a stage of `trace`. The last four columns describe
/// the whole run and repeat on each of its stage rows.
pub fn stage_row(
    echo: &Echo,
    trial: usize,
    trial_seed: u64,
    strategy: &str,
    trace: &RunTrace<f64>,
    record: &RoundRecord<f64>,
) -> Vec<Field> {
    let m = &record.metrics;
    vec![
        Field::text(echo.experiment),
        Field::UInt(trial as u64),
        Field::UInt(trial_seed),
        Field::UInt(echo.n as u64),
        Field::UInt(echo.n_tot),
        Field::UInt(echo.rounds as u64),
        Field::Float(echo.lambda),
        Field::Float(echo.epsilon),
        Field::Float(echo.c),
        Field::Float(echo.sigma_phys),
        Field::text(strategy),
        Field::UInt(record.round as u64),
        Field::UInt(record.shots),
        Field::UInt(record.cumulative_shots),
        Field::Float(m.rmse_k),
        Field::Float(m.rmse_k_sv),
        Field::Float(m.jaccard),
        Field::Float(m.weighted_jaccard),
        Field::Float(m.rel_margin_err),
        Field::Float(m.rmse_f_normalized),
        Field::opt_float(record.delta),
        Field::Bool(record.uniform_fallback),
        Field::Float(trace.shot_fraction()),
        Field::UInt(trace.rounds_executed() as u64),
        Field::Bool(trace.stopped_early),
        Field::Json(json_float_array(&trace.deltas())),
    ]
}

/// Medians of each metric over a set of runs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricMedians {
    pub rmse_k: f64,
    pub rmse_k_sv: f64,
    pub jaccard: f64,
    pub weighted_jaccard: f64,
    pub rel_margin_err: f64,
    pub decision_rmse: f64,
}

impl MetricMedians {
    pub fn of(bundles: &[MetricBundle<f64>]) -> Self {
        let col =
            |f: fn(&MetricBundle<f64>) -> f64| median(&bundles.iter().map(f).collect::<Vec<_>>());
        Self {
            rmse_k: col(|b| b.rmse_k),
            rmse_k_sv: col(|b| b.rmse_k_sv),
            jaccard: col(|b| b.jaccard),
            weighted_jaccard: col(|b| b.weighted_jaccard),
            rel_margin_err: col(|b| b.rel_margin_err),
            decision_rmse: col(|b| b.rmse_f_normalized),
        }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "rmse_k": self.rmse_k,
            "rmse_k_sv": self.rmse_k_sv,
            "jaccard": self.jaccard,
            "weighted_jaccard": self.weighted_jaccard,
            "rel_margin_err": self.rel_margin_err,
            "decision_rmse": self.decision_rmse,
        })
    }
}
