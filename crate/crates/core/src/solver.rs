//! Baby-steps gradient descent (BSGD) on the cost function, plus the
//! multi-restart driver and the restart statistics used to decide when to
//! give up.
//!
//! One run: constant-step gradient descent from a start point strictly inside
//! the hypercube, each coordinate clamped to `[0, 1]` after every update,
//! until no coordinate moves by more than `stop_tol`. The final point is
//! rounded to a bit vector (`x_i > 1/2` means `z_i = 0`) and verified against
//! the clauses directly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::cost::CostFunction;
use crate::error::{Error, Result};
use crate::flows::Trajectory;
use crate::instance::Assignment;
use crate::seed::derive_seed;

/// Distance below which a sampled start is considered to sit on the interior
/// saddle `(2/3, …, 2/3)` and is redrawn.
pub const SADDLE_EXCLUSION: f64 = 1e-9;

/// Gradient norm under which a non-vertex stopping point is reported as a
/// stalled saddle rather than a converged run.
pub const SADDLE_GRADIENT_NORM: f64 = 1e-15;

/// Iterations recorded at stride 1 before `record_every` takes over.
pub const DENSE_PREFIX: u64 = 5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverConfig {
    pub eta: f64,
    pub start_radius: f64,
    pub max_iters: u64,
    pub stop_tol: f64,
    pub seed: u64,
    pub record_every: u64,
    pub record_trajectory: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            eta: 0.005,
            start_radius: 0.05,
            max_iters: 1_000_000,
            stop_tol: 1e-12,
            seed: 0,
            record_every: 10,
            record_trajectory: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return bad(format!("eta must be positive, got {}", self.eta));
        }
        if !(self.start_radius > 0.0 && self.start_radius < 0.5) {
            return bad(format!(
                "start radius must lie in (0, 1/2), got {}",
                self.start_radius
            ));
        }
        if self.stop_tol.is_nan() || self.stop_tol < 0.0 {
            return bad(format!("stop tolerance must be >= 0, got {}", self.stop_tol));
        }
        if self.max_iters < 1 {
            return bad("max_iters must be at least 1".into());
        }
        if self.record_every < 1 {
            return bad("record_every must be at least 1".into());
        }
        Ok(())
    }
}

/// Uniform point on the sphere of `radius` around `(1/2, …, 1/2)`, redrawn if
/// it lands within [`SADDLE_EXCLUSION`] of the saddle.
pub fn sample_start<R: Rng + ?Sized>(n_vars: usize, radius: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(radius > 0.0 && radius < 0.5) {
        return Err(Error::InvalidArgument(format!(
            "start radius must lie in (0, 1/2), got {radius}"
        )));
    }
    if n_vars == 0 {
        return Ok(Vec::new());
    }
    loop {
        let dir: Vec<f64> = (0..n_vars).map(|_| rng.sample(StandardNormal)).collect();
        let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
        if norm.is_nan() || norm <= 0.0 {
            continue;
        }
        let x: Vec<f64> = dir.iter().map(|d| 0.5 + radius * d / norm).collect();
        let to_saddle = x
            .iter()
            .map(|v| (v - 2.0 / 3.0).powi(2))
            .sum::<f64>()
            .sqrt();
        if to_saddle > SADDLE_EXCLUSION {
            return Ok(x);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RunStatus {
    Solved,
    ConvergedUnsolved,
    IterationCap,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    pub status: RunStatus,
    /// Seed the start point was drawn from; `None` for caller-supplied starts.
    pub seed: Option<u64>,
    pub final_point: Vec<f64>,
    pub final_cost: f64,
    pub rounded: Assignment,
    /// `F` at the vertex of `rounded`; equals its unsatisfied-clause count.
    pub vertex_cost: f64,
    pub iterations: u64,
    /// Some iterate strictly inside the hypercube had `F < 1`, which proves
    /// the instance satisfiable.
    pub certificate: bool,
    pub trajectory: Option<Trajectory>,
}

impl RunResult {
    pub fn solved(&self) -> bool {
        self.status == RunStatus::Solved
    }
}

/// `z_i = 1` iff `x_i < 1/2`; points within `tol` of `1/2` round to 0.
pub fn round_point(x: &[f64], tol: f64) -> Assignment {
    Assignment::new(x.iter().map(|&v| v < 0.5 - tol).collect())
}

fn strictly_interior(x: &[f64]) -> bool {
    x.iter().all(|&v| v > 0.0 && v < 1.0)
}

/// One BSGD run from `start`.
pub fn bsgd_run(f: &CostFunction, config: &SolverConfig, start: &[f64]) -> Result<RunResult> {
    config.validate()?;
    if start.len() != f.n_vars() {
        return Err(Error::LengthMismatch {
            expected: f.n_vars(),
            got: start.len(),
        });
    }
    if let Some((index, &value)) = start
        .iter()
        .enumerate()
        .find(|(_, &v)| !(v > 0.0 && v < 1.0))
    {
        return Err(Error::StartOutsideHypercube { index, value });
    }

    let n = f.n_vars();
    let eta = config.eta;
    let mut x = start.to_vec();
    let mut grad = vec![0.0; n];
    let mut cost = f.eval_unchecked(&x);
    let mut certificate = cost < 1.0;
    let mut trajectory = config.record_trajectory.then(|| {
        let mut t = Trajectory::new(n, config.record_every);
        t.push(1, cost, &x);
        t
    });

    let mut iterations = 0u64;
    let mut converged = false;
    while iterations < config.max_iters {
        f.gradient_into(&x, &mut grad);
        let mut max_step = 0.0f64;
        for (xj, &gj) in x.iter_mut().zip(&grad) {
            let next = (*xj - eta * gj).clamp(0.0, 1.0);
            max_step = max_step.max((next - *xj).abs());
            *xj = next;
        }
        iterations += 1;
        cost = f.eval_unchecked(&x);
        if !certificate && cost < 1.0 && strictly_interior(&x) {
            certificate = true;
        }
        converged = max_step <= config.stop_tol;
        if let Some(t) = trajectory.as_mut() {
            // Trajectory index of the start point is 1.
            let index = iterations + 1;
            if converged
                || iterations == config.max_iters
                || index <= DENSE_PREFIX + 1
                || (index - 1).is_multiple_of(config.record_every)
            {
                t.push(index, cost, &x);
            }
        }
        if converged {
            break;
        }
    }

    let rounded = round_point(&x, config.stop_tol);
    let vertex_cost = f.eval_unchecked(&rounded.to_vertex());
    let check = f.instance().check_assignment(&rounded)?;
    let status = if check.satisfied {
        RunStatus::Solved
    } else if !converged {
        RunStatus::IterationCap
    } else {
        let at_vertex = x.iter().all(|&v| v == 0.0 || v == 1.0);
        f.gradient_into(&x, &mut grad);
        let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if !at_vertex && grad_norm < SADDLE_GRADIENT_NORM {
            RunStatus::IterationCap
        } else {
            RunStatus::ConvergedUnsolved
        }
    };

    Ok(RunResult {
        status,
        seed: None,
        final_point: x,
        final_cost: cost,
        rounded,
        vertex_cost,
        iterations,
        certificate,
        trajectory,
    })
}

/// Seed of restart `run_index` under `base_seed`.
pub fn run_seed(base_seed: u64, run_index: u64) -> u64 {
    derive_seed(base_seed, run_index)
}

/// One BSGD run from a start drawn with the seed of restart `run_index`.
pub fn seeded_run(f: &CostFunction, config: &SolverConfig, run_index: u64) -> Result<RunResult> {
    let seed = run_seed(config.seed, run_index);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = sample_start(f.n_vars(), config.start_radius, &mut rng)?;
    let mut run = bsgd_run(f, config, &start)?;
    run.seed = Some(seed);
    if let Some(t) = run.trajectory.as_mut() {
        t.seed = seed;
    }
    Ok(run)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RestartPlan {
    pub max_runs: u64,
    /// Runs executed concurrently per wave; results never depend on it.
    pub workers: usize,
    pub stop_at_first_success: bool,
}

impl RestartPlan {
    pub fn new(max_runs: u64) -> Self {
        RestartPlan {
            max_runs,
            workers: 1,
            stop_at_first_success: true,
        }
    }

    pub fn workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }

    pub fn exhaustive(mut self) -> Self {
        self.stop_at_first_success = false;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RestartOutcome {
    /// 0-based index of the first successful run.
    pub first_success: Option<u64>,
    pub stats: RestartStats,
    /// Runs `0..=first_success` (or all runs when none succeeded or the plan
    /// is exhaustive), in index order.
    pub runs: Vec<RunResult>,
}

impl RestartOutcome {
    pub fn solution(&self) -> Option<&RunResult> {
        self.first_success.map(|i| &self.runs[i as usize])
    }

    pub fn certified(&self) -> bool {
        self.runs.iter().any(|r| r.certificate)
    }
}

/// Up to `plan.max_runs` independent runs with per-run seeds derived from
/// `config.seed`.
///
/// Runs execute in waves of `plan.workers` on the current rayon pool. When
/// stopping at the first success, runs after the lowest-index success are
/// discarded, so the outcome is identical for every worker count.
pub fn solve_with_restarts(
    f: &CostFunction,
    config: &SolverConfig,
    plan: RestartPlan,
) -> Result<RestartOutcome> {
    config.validate()?;
    if plan.max_runs < 1 {
        return Err(Error::InvalidArgument("max_runs must be at least 1".into()));
    }
    let wave = plan.workers.max(1) as u64;
    let mut runs: Vec<RunResult> = Vec::new();
    let mut first_success = None;
    let mut next = 0u64;
    while next < plan.max_runs {
        let end = (next + wave).min(plan.max_runs);
        let batch: Vec<RunResult> = if wave == 1 {
            vec![seeded_run(f, config, next)?]
        } else {
            (next..end)
                .into_par_iter()
                .map(|i| seeded_run(f, config, i))
                .collect::<Result<_>>()?
        };
        for run in batch {
            let index = runs.len() as u64;
            if run.solved() && first_success.is_none() {
                first_success = Some(index);
            }
            runs.push(run);
        }
        next = end;
        if plan.stop_at_first_success {
            if let Some(i) = first_success {
                runs.truncate(i as usize + 1);
                break;
            }
        }
    }
    let successes = runs.iter().filter(|r| r.solved()).count() as u64;
    Ok(RestartOutcome {
        first_success,
        stats: RestartStats::new(runs.len() as u64, successes),
        runs,
    })
}

/// Empirical single-run success statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RestartStats {
    pub runs_attempted: u64,
    pub successes: u64,
    pub q_hat: f64,
    /// `1 / q_hat`; `None` without successes.
    pub n_s_hat: Option<f64>,
    /// `sqrt((1 − q_hat) / q_hat²)`; `None` without successes.
    pub sigma_hat: Option<f64>,
}

impl RestartStats {
    pub fn new(runs_attempted: u64, successes: u64) -> Self {
        let q_hat = if runs_attempted == 0 {
            0.0
        } else {
            successes as f64 / runs_attempted as f64
        };
        let (n_s_hat, sigma_hat) = if successes > 0 {
            (
                Some(expected_trials(q_hat)),
                Some(trial_variance(q_hat).sqrt()),
            )
        } else {
            (None, None)
        };
        RestartStats {
            runs_attempted,
            successes,
            q_hat,
            n_s_hat,
            sigma_hat,
        }
    }

    /// One-sided Chebyshev bound on `Pr{n ≥ k·n_s}` at `q = q_hat`.
    pub fn chebyshev_bound(&self, k: f64) -> Option<f64> {
        (self.successes > 0).then(|| chebyshev_tail(self.q_hat, k))
    }
}

/// Expected number of runs until the first success, `1 / q`.
pub fn expected_trials(q: f64) -> f64 {
    1.0 / q
}

/// Variance of the number of runs until the first success, `(1 − q) / q²`.
pub fn trial_variance(q: f64) -> f64 {
    (1.0 - q) / (q * q)
}

/// `(1 − q) / (1 − q + (k − 1)²)`, the one-sided Chebyshev bound on
/// needing at least `k / q` runs.
pub fn chebyshev_tail(q: f64, k: f64) -> f64 {
    (1.0 - q) / (1.0 - q + (k - 1.0).powi(2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StoppingRule {
    pub required_runs: u64,
    pub failure_prob_bound: f64,
}

/// Number of failed runs after which a solution is ruled out at the
/// Chebyshev bound, for an assumed single-run success probability `q`.
pub fn stopping_rule(q_assumed: f64, k: f64) -> Result<StoppingRule> {
    if !(q_assumed > 0.0 && q_assumed < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "assumed success probability must lie in (0, 1), got {q_assumed}"
        )));
    }
    if !(k > 1.0 && k.is_finite()) {
        return Err(Error::InvalidArgument(format!("k must exceed 1, got {k}")));
    }
    Ok(StoppingRule {
        required_runs: (k / q_assumed - 1.0).ceil() as u64,
        failure_prob_bound: chebyshev_tail(q_assumed, k),
    })
}
