//! Variable flows: recorded trajectories, the starting-slope law, the
//! flow-family classifier, and phase-transition sweeps over `r = M / N`.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::cost::CostFunction;
use crate::error::{Error, Result};
use crate::instance::{brute_force_oracle, generate_instance};
use crate::seed::derive_seed;
use crate::solver::{seeded_run, solve_with_restarts, RestartPlan, SolverConfig};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    /// The start point is iteration 1; iteration `k + 1` follows the `k`-th update.
    pub iter: u64,
    pub cost: f64,
    pub x: Vec<f64>,
}

/// Sampled iterates of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub n_vars: usize,
    pub seed: u64,
    pub stride: u64,
    snapshots: Vec<Snapshot>,
}

impl Trajectory {
    pub fn new(n_vars: usize, stride: u64) -> Self {
        Trajectory {
            n_vars,
            seed: 0,
            stride,
            snapshots: Vec::new(),
        }
    }

    /// Appends a snapshot. Iteration indices must increase strictly.
    pub fn push(&mut self, iter: u64, cost: f64, x: &[f64]) {
        debug_assert_eq!(x.len(), self.n_vars);
        debug_assert!(self.snapshots.last().is_none_or(|s| s.iter < iter));
        self.snapshots.push(Snapshot {
            iter,
            cost,
            x: x.to_vec(),
        });
    }

    pub fn snapshots(&self) -> &[Snapshot] {
        &self.snapshots
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn at(&self, iter: u64) -> Option<&Snapshot> {
        self.snapshots
            .binary_search_by_key(&iter, |s| s.iter)
            .ok()
            .map(|i| &self.snapshots[i])
    }

    /// Values of variable `j` (0-based) across snapshots.
    pub fn series(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.snapshots.iter().map(move |s| s.x[j])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeCheck {
    pub observed: f64,
    pub predicted: f64,
    pub ok: bool,
}

/// Compares each variable's first displacement with `η·C_k/4`, within `0.1·η`.
pub fn initial_slope_check(
    trajectory: &Trajectory,
    eta: f64,
    clause_degree: &[usize],
) -> Result<Vec<SlopeCheck>> {
    let (Some(first), Some(second)) = (trajectory.at(1), trajectory.at(2)) else {
        return Err(Error::Trajectory(
            "iterations 1 and 2 must both be recorded".into(),
        ));
    };
    if clause_degree.len() != trajectory.n_vars {
        return Err(Error::LengthMismatch {
            expected: trajectory.n_vars,
            got: clause_degree.len(),
        });
    }
    Ok(clause_degree
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            let observed = second.x[k] - first.x[k];
            let predicted = 0.25 * eta * c as f64;
            SlopeCheck {
                observed,
                predicted,
                ok: (observed - predicted).abs() <= 0.1 * eta,
            }
        })
        .collect())
}

/// Flow families of individual variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum FlowLabel {
    /// Monotone growth towards 1.
    I,
    /// Plateau near 2/3, then off to 1.
    IIUp,
    /// Plateau near 2/3, then off to 0.
    IIDown,
    /// Excursion towards 1, plateau near 1/2, then off to 1.
    IIIUp,
    /// Excursion towards 1, plateau near 1/2, then off to 0.
    IIIDown,
    /// Growth first, then reversal towards 0.
    IV,
    /// Stationary: the variable is in no clause.
    V,
    Irregular,
}

impl FlowLabel {
    pub const ALL: [FlowLabel; 8] = [
        FlowLabel::I,
        FlowLabel::IIUp,
        FlowLabel::IIDown,
        FlowLabel::IIIUp,
        FlowLabel::IIIDown,
        FlowLabel::IV,
        FlowLabel::V,
        FlowLabel::Irregular,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FlowLabel::I => "I",
            FlowLabel::IIUp => "II-up",
            FlowLabel::IIDown => "II-down",
            FlowLabel::IIIUp => "III-up",
            FlowLabel::IIIDown => "III-down",
            FlowLabel::IV => "IV",
            FlowLabel::V => "V",
            FlowLabel::Irregular => "Irregular",
        }
    }
}

impl fmt::Display for FlowLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowThresholds {
    /// Final value counted as "reached 1".
    pub top: f64,
    /// Final value counted as "reached 0".
    pub bottom: f64,
    /// Half-width of the plateau bands around 2/3 and 1/2.
    pub plateau_band: f64,
    /// Minimum share of all iterations spent inside a plateau band.
    pub plateau_dwell: f64,
    /// Largest cumulative decrease still counted as monotone growth.
    pub monotone_slack: f64,
    /// Largest deviation from the start still counted as stationary.
    pub stationary_tol: f64,
}

impl Default for FlowThresholds {
    fn default() -> Self {
        FlowThresholds {
            top: 0.99,
            bottom: 0.01,
            plateau_band: 0.05,
            plateau_dwell: 0.10,
            monotone_slack: 0.01,
            stationary_tol: 1e-12,
        }
    }
}

/// Labels every variable of a finished trajectory.
///
/// Decision order: stationary (V); unfinished flows are Irregular; plateau at
/// 1/2 after a first excursion above the band (III); plateau at 2/3 (II); monotone
/// growth to 1 (I); growth followed by a fall to 0 (IV); otherwise Irregular.
/// Dwell time is weighted by the iteration gaps between snapshots so that
/// strided recordings measure time, not samples.
pub fn classify_flows(trajectory: &Trajectory, th: &FlowThresholds) -> Result<Vec<FlowLabel>> {
    let snaps = trajectory.snapshots();
    if snaps.len() < 3 {
        return Err(Error::Trajectory(format!(
            "need at least 3 snapshots to classify, have {}",
            snaps.len()
        )));
    }
    let total = (snaps[snaps.len() - 1].iter - snaps[0].iter) as f64;
    let weights: Vec<f64> = std::iter::once(0.0)
        .chain(snaps.windows(2).map(|w| (w[1].iter - w[0].iter) as f64))
        .collect();
    let mut values = Vec::with_capacity(snaps.len());
    Ok((0..trajectory.n_vars)
        .map(|j| {
            values.clear();
            values.extend(trajectory.series(j));
            classify_series(&values, &weights, total, th)
        })
        .collect())
}

fn classify_series(v: &[f64], weights: &[f64], total: f64, th: &FlowThresholds) -> FlowLabel {
    let start = v[0];
    let last = v[v.len() - 1];
    if v.iter().all(|&x| (x - start).abs() < th.stationary_tol) {
        return FlowLabel::V;
    }
    let up = last >= th.top;
    let down = last <= th.bottom;
    if !up && !down {
        return FlowLabel::Irregular;
    }
    let pick = |u, d| if up { u } else { d };

    let peak = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let dwell = |level: f64, from: usize| -> f64 {
        let t: f64 = (from..v.len())
            .filter(|&i| (v[i] - level).abs() <= th.plateau_band)
            .map(|i| weights[i])
            .sum();
        if total > 0.0 {
            t / total
        } else {
            0.0
        }
    };

    // III: after first leaving the 1/2 band upwards, the flow comes back and
    // dwells there.
    if let Some(excursion) = v.iter().position(|&x| x > 0.5 + th.plateau_band) {
        if dwell(0.5, excursion + 1) >= th.plateau_dwell {
            return pick(FlowLabel::IIIUp, FlowLabel::IIIDown);
        }
    }
    if dwell(2.0 / 3.0, 0) >= th.plateau_dwell {
        return pick(FlowLabel::IIUp, FlowLabel::IIDown);
    }
    if up {
        let reversal: f64 = v.windows(2).map(|w| (w[0] - w[1]).max(0.0)).sum();
        if reversal <= th.monotone_slack {
            return FlowLabel::I;
        }
    } else if peak - start >= th.monotone_slack {
        return FlowLabel::IV;
    }
    FlowLabel::Irregular
}

/// Label histogram in [`FlowLabel::ALL`] order.
pub fn label_counts(labels: &[FlowLabel]) -> BTreeMap<FlowLabel, u64> {
    let mut counts: BTreeMap<FlowLabel, u64> = FlowLabel::ALL.iter().map(|&l| (l, 0)).collect();
    for l in labels {
        *counts.entry(*l).or_default() += 1;
    }
    counts
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepConfig {
    pub n_vars: usize,
    pub r_grid: Vec<f64>,
    pub instances_per_r: usize,
    pub solver: SolverConfig,
    /// Restart budget per instance.
    pub run_budget: u64,
    pub base_seed: u64,
    /// Run the exhaustive oracle when `n_vars <= oracle_cap`.
    pub oracle: bool,
    pub oracle_cap: usize,
    /// Classify the flows of each successful run.
    pub flows: bool,
    pub thresholds: FlowThresholds,
}

impl SweepConfig {
    pub fn new(n_vars: usize, r_grid: Vec<f64>, instances_per_r: usize) -> Self {
        SweepConfig {
            n_vars,
            r_grid,
            instances_per_r,
            solver: SolverConfig::default(),
            run_budget: 10,
            base_seed: 0,
            oracle: false,
            oracle_cap: crate::instance::DEFAULT_ORACLE_CAP,
            flows: false,
            thresholds: FlowThresholds::default(),
        }
    }
}

/// `from, from + step, …` up to `to` inclusive, rounded to 12 decimals.
pub fn r_grid(from: f64, to: f64, step: f64) -> Result<Vec<f64>> {
    if !from.is_finite() || !to.is_finite() || step.is_nan() || step <= 0.0 || to < from {
        return Err(Error::InvalidArgument(format!(
            "empty or invalid grid: from {from} to {to} step {step}"
        )));
    }
    let count = ((to - from) / step + 1e-9).floor() as usize + 1;
    Ok((0..count)
        .map(|i| ((from + i as f64 * step) * 1e12).round() / 1e12)
        .collect())
}

/// `round(r·N)` with ties rounded up.
pub fn clause_count(r: f64, n_vars: usize) -> usize {
    let exact = (r * n_vars as f64 * 1e9).round() / 1e9;
    (exact + 0.5).floor() as usize
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub r: f64,
    pub m: usize,
    pub n: usize,
    pub instances: usize,
    pub solver_successes: usize,
    pub solver_success_frac: f64,
    pub oracle_sat: Option<usize>,
    pub oracle_sat_frac: Option<f64>,
    /// Satisfiable instances the solver did not solve within budget.
    pub oracle_sat_solver_failed: Option<usize>,
    pub mean_runs_to_success: Option<f64>,
    pub certificates: usize,
    pub flow_counts: Option<BTreeMap<FlowLabel, u64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub config: SweepConfig,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    /// Linear interpolation of the `r` where the satisfiable fraction first
    /// drops below 1/2.
    pub fn r_star(&self) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .rows
            .iter()
            .map(|row| row.oracle_sat_frac.map(|f| (row.r, f)))
            .collect::<Option<_>>()?;
        crossing_at_half(&pts)
    }
}

/// First `r` where the piecewise-linear curve through `pts` goes from `>= 1/2`
/// to `< 1/2`.
pub fn crossing_at_half(pts: &[(f64, f64)]) -> Option<f64> {
    pts.windows(2).find_map(|w| {
        let ((r0, f0), (r1, f1)) = (w[0], w[1]);
        (f0 >= 0.5 && f1 < 0.5).then(|| r0 + (f0 - 0.5) / (f0 - f1) * (r1 - r0))
    })
}

struct CellOutcome {
    solved_at: Option<u64>,
    oracle_sat: Option<bool>,
    certified: bool,
    labels: Option<Vec<FlowLabel>>,
}

fn run_cell(cfg: &SweepConfig, r_index: usize, m: usize, inst_index: usize) -> Result<CellOutcome> {
    let cell_seed = derive_seed(derive_seed(cfg.base_seed, r_index as u64), inst_index as u64);
    let instance = generate_instance(cfg.n_vars, m, cell_seed)?;
    let f = CostFunction::new(&instance);
    let solver = SolverConfig {
        seed: derive_seed(cell_seed, u64::MAX),
        record_trajectory: false,
        ..cfg.solver.clone()
    };
    let outcome = solve_with_restarts(&f, &solver, RestartPlan::new(cfg.run_budget))?;
    let oracle_sat = if cfg.oracle && cfg.n_vars <= cfg.oracle_cap {
        Some(brute_force_oracle(&instance, cfg.oracle_cap)?.is_sat())
    } else {
        None
    };
    let labels = match (cfg.flows, outcome.first_success) {
        (true, Some(i)) => {
            // Replay the successful run with recording on; runs are deterministic.
            let traced = SolverConfig {
                record_trajectory: true,
                ..solver.clone()
            };
            let run = seeded_run(&f, &traced, i)?;
            let t = run.trajectory.expect("recording enabled");
            Some(classify_flows(&t, &cfg.thresholds)?)
        }
        _ => None,
    };
    Ok(CellOutcome {
        solved_at: outcome.first_success,
        oracle_sat,
        certified: outcome.certified(),
        labels,
    })
}

/// Generates `instances_per_r` random instances per grid point, solves each
/// under the restart budget and aggregates per-`r` statistics.
///
/// Cells run in parallel on the current rayon pool; every cell derives its
/// own seeds from `base_seed`, so the report does not depend on scheduling.
pub fn phase_sweep(cfg: &SweepConfig) -> Result<SweepReport> {
    if cfg.r_grid.is_empty() {
        return Err(Error::InvalidArgument("empty r grid".into()));
    }
    if cfg.instances_per_r == 0 {
        return Err(Error::InvalidArgument("instances per r must be positive".into()));
    }
    cfg.solver.validate()?;
    let ms: Vec<usize> = cfg
        .r_grid
        .iter()
        .map(|&r| {
            if !(r > 0.0 && r <= 1.0) {
                return Err(Error::InvalidArgument(format!("r = {r} outside (0, 1]")));
            }
            let m = clause_count(r, cfg.n_vars);
            if m < 1 {
                return Err(Error::InvalidArgument(format!(
                    "r = {r} gives no clauses at N = {}",
                    cfg.n_vars
                )));
            }
            Ok(m)
        })
        .collect::<Result<_>>()?;

    let cells: Vec<(usize, usize)> = (0..ms.len())
        .flat_map(|ri| (0..cfg.instances_per_r).map(move |ii| (ri, ii)))
        .collect();
    let outcomes: Vec<CellOutcome> = cells
        .par_iter()
        .map(|&(ri, ii)| run_cell(cfg, ri, ms[ri], ii))
        .collect::<Result<_>>()?;

    let rows = outcomes
        .chunks(cfg.instances_per_r)
        .zip(cfg.r_grid.iter().zip(&ms))
        .map(|(cells, (&r, &m))| summarize(cfg, r, m, cells))
        .collect();
    Ok(SweepReport {
        config: cfg.clone(),
        rows,
    })
}

fn summarize(cfg: &SweepConfig, r: f64, m: usize, cells: &[CellOutcome]) -> SweepRow {
    let instances = cells.len();
    let solved: Vec<u64> = cells.iter().filter_map(|c| c.solved_at).collect();
    let solver_successes = solved.len();
    let oracle_sat = cells
        .iter()
        .map(|c| c.oracle_sat)
        .collect::<Option<Vec<bool>>>();
    let sat_count = oracle_sat.as_ref().map(|v| v.iter().filter(|&&s| s).count());
    let missed = oracle_sat.as_ref().map(|v| {
        v.iter()
            .zip(cells)
            .filter(|(&sat, c)| sat && c.solved_at.is_none())
            .count()
    });
    let mean_runs = (!solved.is_empty())
        .then(|| solved.iter().map(|&i| (i + 1) as f64).sum::<f64>() / solved.len() as f64);
    let flow_counts = cfg.flows.then(|| {
        let all: Vec<FlowLabel> = cells
            .iter()
            .filter_map(|c| c.labels.as_ref())
            .flatten()
            .copied()
            .collect();
        label_counts(&all)
    });
    SweepRow {
        r,
        m,
        n: cfg.n_vars,
        instances,
        solver_successes,
        solver_success_frac: solver_successes as f64 / instances as f64,
        oracle_sat: sat_count,
        oracle_sat_frac: sat_count.map(|s| s as f64 / instances as f64),
        oracle_sat_solver_failed: missed,
        mean_runs_to_success: mean_runs,
        certificates: cells.iter().filter(|c| c.certified).count(),
        flow_counts,
    }
}
