//! The adaptive measurement loop and the uniform baseline it is judged
//! against.
//!
//! An adaptive run measures every entry `m0` times, trains, and then spends
//! the rest of the budget over at most `R` rounds. Each round scores entries
//! from the current model, draws that round's shots from the multinomial over
//! the scores, retrains from scratch, and stops early once the relative change
//! of the dual vector falls below `epsilon`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::allocation::{multinomial_draw, uniform_allocation, Allocation};
use crate::error::{Error, Result};
use crate::kernel::KernelMatrix;
use crate::measurement::{assemble_estimate, simulate_shots, MeasurementLedger, NoiseModel};
use crate::metrics::{MetricBundle, Reference};
use crate::sensitivity::{allocation_scores, entry_variances, SensitivitySignals};
use crate::svm::{train, SolverOptions, SvmModel};
use crate::tri::num_pairs;
use crate::{Label, Scalar};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdaptiveConfig<T> {
    pub n_tot: u64,
    pub rounds: usize,
    pub m0: u64,
    pub lambda: T,
    pub epsilon: T,
    pub c: T,
    pub kkt_tol: T,
    pub seed: u64,
    /// Lets the learner add the hardware noise level to its plug-in entry
    /// variances. Off by default because it is not observable in practice.
    pub sigma_known: bool,
}

impl<T: Scalar> Default for AdaptiveConfig<T> {
    fn default() -> Self {
        Self {
            n_tot: 0,
            rounds: 5,
            m0: 2,
            lambda: T::lit(0.5),
            epsilon: T::zero(),
            c: T::one(),
            kkt_tol: T::lit(1e-6),
            seed: 0,
            sigma_known: false,
        }
    }
}

impl<T: Scalar> AdaptiveConfig<T> {
    /// The stream a run with this configuration should draw from.
    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }

    pub fn pilot_shots(&self, n: usize) -> u64 {
        self.m0 * num_pairs(n) as u64
    }

    /// Shots drawn in round `r` (1-based); the indivisible remainder goes to
    /// the last round.
    pub fn round_budget(&self, n: usize, r: usize) -> u64 {
        if self.rounds == 0 || r == 0 || r > self.rounds {
            return 0;
        }
        let rest = self.n_tot - self.pilot_shots(n);
        let per = rest / self.rounds as u64;
        if r == self.rounds {
            per + rest % self.rounds as u64
        } else {
            per
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.m0 == 0 {
            return Err(Error::Domain("m0 must be at least 1".into()));
        }
        if self.n_tot < self.pilot_shots(n) {
            return Err(Error::InsufficientBudget {
                budget: self.n_tot,
                pairs: num_pairs(n),
            });
        }
        if !(self.lambda >= T::zero() && self.lambda <= T::one()) {
            return Err(Error::Domain(format!(
                "lambda = {} is outside [0, 1]",
                self.lambda
            )));
        }
        if !(self.epsilon >= T::zero()) {
            return Err(Error::Domain(format!(
                "epsilon = {} must be >= 0",
                self.epsilon
            )));
        }
        if !(self.c > T::zero() && self.c.is_finite()) {
            return Err(Error::Domain(format!("C = {} must be positive", self.c)));
        }
        if !(self.kkt_tol > T::zero()) {
            return Err(Error::Domain(format!(
                "kkt_tol = {} must be positive",
                self.kkt_tol
            )));
        }
        Ok(())
    }

    fn solver(&self) -> SolverOptions<T> {
        SolverOptions::with_tol(self.kkt_tol)
    }
}

/// A learning problem with its ground truth: the true kernel, the labels,
/// the hardware noise, and the model trained on the true kernel.
#[derive(Clone, Debug)]
pub struct Problem<T> {
    pub labels: Vec<Label>,
    pub noise: NoiseModel<T>,
    pub reference: Reference<T>,
}

impl<T: Scalar> Problem<T> {
    pub fn new(
        k_true: KernelMatrix<T>,
        labels: Vec<Label>,
        noise: NoiseModel<T>,
        c: T,
        opts: SolverOptions<T>,
    ) -> Result<Self> {
        if noise.n() != k_true.n() {
            return Err(Error::DimensionMismatch {
                expected: k_true.n(),
                got: noise.n(),
            });
        }
        let model = train(&k_true, &labels, c, opts)?;
        Ok(Self {
            labels,
            noise,
            reference: Reference::new(k_true, model)?,
        })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn k_true(&self) -> &KernelMatrix<T> {
        &self.reference.k_true
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundRecord<T> {
    /// 0 is the pilot (or the single uniform pass).
    pub round: usize,
    pub shots: u64,
    pub cumulative_shots: u64,
    pub alpha: Vec<T>,
    pub bias: T,
    pub delta: Option<T>,
    /// The scores were all zero and the round was drawn uniformly.
    pub uniform_fallback: bool,
    pub metrics: MetricBundle<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunTrace<T> {
    pub records: Vec<RoundRecord<T>>,
    pub stopped_early: bool,
    pub n_tot: u64,
}

impl<T: Scalar> RunTrace<T> {
    pub fn final_record(&self) -> &RoundRecord<T> {
        self.records
            .last()
            .expect("a trace always holds the pilot record")
    }

    pub fn shots_used(&self) -> u64 {
        self.final_record().cumulative_shots
    }

    pub fn shot_fraction(&self) -> T {
        T::from_count(self.shots_used()) / T::from_count(self.n_tot)
    }

    /// Adaptive rounds executed after the pilot.
    pub fn rounds_executed(&self) -> usize {
        self.records.len() - 1
    }

    pub fn deltas(&self) -> Vec<T> {
        self.records.iter().filter_map(|r| r.delta).collect()
    }
}

/// `||new - old|| / (||old|| + 1e-12)`.
pub fn dual_stability<T: Scalar>(alpha_new: &[T], alpha_old: &[T]) -> Result<T> {
    if alpha_new.len() != alpha_old.len() {
        return Err(Error::DimensionMismatch {
            expected: alpha_old.len(),
            got: alpha_new.len(),
        });
    }
    let diff: T = alpha_new
        .iter()
        .zip(alpha_old)
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum();
    let norm: T = alpha_old.iter().map(|&a| a * a).sum();
    Ok(diff.sqrt() / (norm.sqrt() + T::lit(1e-12)))
}

fn measure<T: Scalar, R: Rng + ?Sized>(
    problem: &Problem<T>,
    noise: &mut NoiseModel<T>,
    ledger: &mut MeasurementLedger,
    alloc: &Allocation<u64>,
    rng: &mut R,
) -> Result<()> {
    for ((i, j), &m) in alloc.counts().iter() {
        if m > 0 {
            let s = simulate_shots(problem.k_true(), noise, i, j, m, rng)?;
            ledger.record(i, j, s, m)?;
        }
    }
    Ok(())
}

struct State<T> {
    ledger: MeasurementLedger,
    k_hat: KernelMatrix<T>,
    model: SvmModel<T>,
}

fn fit<T: Scalar>(
    problem: &Problem<T>,
    config: &AdaptiveConfig<T>,
    ledger: MeasurementLedger,
) -> Result<State<T>> {
    let k_hat = assemble_estimate(&ledger)?;
    let model = train(&k_hat, &problem.labels, config.c, config.solver())?;
    Ok(State {
        ledger,
        k_hat,
        model,
    })
}

fn pilot_state<T: Scalar, R: Rng + ?Sized>(
    problem: &Problem<T>,
    config: &AdaptiveConfig<T>,
    noise: &mut NoiseModel<T>,
    rng: &mut R,
) -> Result<State<T>> {
    config.validate(problem.n())?;
    let n = problem.n();
    let mut ledger = MeasurementLedger::new(n);
    let pilot = Allocation::from_counts(crate::UpperTri::filled(n, config.m0));
    measure(problem, noise, &mut ledger, &pilot, rng)?;
    fit(problem, config, ledger)
}

/// Measures every entry `m0` times and trains on the resulting estimate.
pub fn run_pilot<T: Scalar, R: Rng + ?Sized>(
    problem: &Problem<T>,
    config: &AdaptiveConfig<T>,
    rng: &mut R,
) -> Result<(MeasurementLedger, SvmModel<T>)> {
    let mut noise = problem.noise.fresh();
    let s = pilot_state(problem, config, &mut noise, rng)?;
    Ok((s.ledger, s.model))
}

fn record<T: Scalar>(
    problem: &Problem<T>,
    state: &State<T>,
    round: usize,
    shots: u64,
    delta: Option<T>,
    uniform_fallback: bool,
) -> Result<RoundRecord<T>> {
    Ok(RoundRecord {
        round,
        shots,
        cumulative_shots: state.ledger.total_shots(),
        alpha: state.model.alpha().to_vec(),
        bias: state.model.bias(),
        delta,
        uniform_fallback,
        metrics: problem.reference.compare(&state.k_hat, &state.model)?,
    })
}

/// Runs the full adaptive loop.
pub fn run_adaptive<T: Scalar, R: Rng + ?Sized>(
    problem: &Problem<T>,
    config: &AdaptiveConfig<T>,
    rng: &mut R,
) -> Result<RunTrace<T>> {
    let n = problem.n();
    let mut noise = problem.noise.fresh();
    let mut state = pilot_state(problem, config, &mut noise, rng)?;
    let mut records = vec![record(
        problem,
        &state,
        0,
        state.ledger.total_shots(),
        None,
        false,
    )?];
    let known_sigma = config.sigma_known.then(|| problem.noise.sigma());
    let mut stopped_early = false;

    for r in 1..=config.rounds {
        let variances = entry_variances(&state.ledger, known_sigma)?;
        let signals = SensitivitySignals::compute(&state.model, &state.k_hat, &variances)?;
        let scores = allocation_scores(
            &state.model,
            &state.ledger,
            &signals,
            config.lambda,
            config.c,
        )?;
        let budget = config.round_budget(n, r);
        let alloc = multinomial_draw(&scores.values, budget, rng)?;
        let mut ledger = state.ledger;
        measure(problem, &mut noise, &mut ledger, &alloc, rng)?;
        let old_alpha = state.model.alpha().to_vec();
        state = fit(problem, config, ledger)?;
        let delta = dual_stability(state.model.alpha(), &old_alpha)?;
        records.push(record(
            problem,
            &state,
            r,
            budget,
            Some(delta),
            scores.uniform_fallback,
        )?);
        if delta < config.epsilon {
            stopped_early = r < config.rounds;
            break;
        }
    }
    Ok(RunTrace {
        records,
        stopped_early,
        n_tot: config.n_tot,
    })
}

/// Spends the whole budget uniformly in one pass and trains once.
pub fn run_uniform<T: Scalar, R: Rng + ?Sized>(
    problem: &Problem<T>,
    config: &AdaptiveConfig<T>,
    rng: &mut R,
) -> Result<RunTrace<T>> {
    config.validate(problem.n())?;
    let mut noise = problem.noise.fresh();
    let alloc = uniform_allocation(problem.n(), config.n_tot, rng)?;
    let mut ledger = MeasurementLedger::new(problem.n());
    measure(problem, &mut noise, &mut ledger, &alloc, rng)?;
    let state = fit(problem, config, ledger)?;
    Ok(RunTrace {
        records: vec![record(problem, &state, 0, config.n_tot, None, false)?],
        stopped_early: false,
        n_tot: config.n_tot,
    })
}
