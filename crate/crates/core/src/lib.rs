//! Solver and experiment harness for 3-bit exact cover (positive 1-in-3 SAT)
//! through its multilinear relaxation on the unit hypercube.
//!
//! * [`instance`]: clauses, the text format, a seeded generator and an exhaustive oracle.
//! * [`cost`]: the cost function `F`, its gradient and diagnostics.
//! * [`solver`]: baby-steps gradient descent with restarts and restart statistics.
//! * [`flows`]: trajectories, slope law, flow-family classification, sweeps.
//! * [`report`]: CSV and JSON output.

pub mod cost;
pub mod error;
pub mod flows;
pub mod instance;
pub mod report;
pub mod seed;
pub mod solver;

pub use cost::{clause_probability, CostFunction, VertexSpectrum};
pub use error::{Error, Result};
pub use flows::{
    classify_flows, initial_slope_check, phase_sweep, FlowLabel, FlowThresholds, SweepConfig,
    SweepReport, Trajectory,
};
pub use instance::{
    brute_force_oracle, generate_instance, parse_assignment, parse_instance, Assignment, Clause,
    Instance, OracleVerdict,
};
pub use solver::{
    bsgd_run, sample_start, solve_with_restarts, stopping_rule, RestartOutcome, RestartPlan,
    RestartStats, RunResult, RunStatus, SolverConfig,
};
