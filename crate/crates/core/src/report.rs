//! Machine-readable output: CSV tables and versioned JSON documents.
//!
//! Floats are written with 17 significant digits in JSON and CSV and with 9 in
//! human-readable text.

use std::fmt::Write as _;

use serde::Serialize;
use serde_json::{json, Value};

use crate::flows::{FlowLabel, SweepReport, Trajectory};
use crate::solver::{RestartOutcome, RunStatus, SolverConfig, StoppingRule};

pub const SCHEMA_VERSION: u64 = 1;

/// Digits for machine-readable floats.
pub const MACHINE_DIGITS: usize = 17;
/// Digits for human-readable floats.
pub const TEXT_DIGITS: usize = 9;

/// `%.{digits}g`-style formatting: `digits` significant digits, trailing
/// zeros dropped, scientific notation outside `1e-5 ..= 10^digits`.
pub fn fmt_sig(v: f64, digits: usize) -> String {
    if v.is_nan() {
        return "NaN".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= digits as i32 {
        let mantissa = trim_zeros(mantissa);
        format!("{mantissa}e{exp}")
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Pretty-printed JSON with floats at [`MACHINE_DIGITS`].
pub fn to_json_string(value: &Value) -> String {
    let mut out = String::new();
    write_json(&mut out, value, 0);
    out.push('\n');
    out
}

/// Serializes `value` and renders it with [`to_json_string`].
pub fn json_of<T: Serialize>(value: &T) -> String {
    to_json_string(&serde_json::to_value(value).expect("serializable"))
}

fn write_json(out: &mut String, v: &Value, depth: usize) {
    let pad = |out: &mut String, d: usize| out.extend(std::iter::repeat_n("  ", d));
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                let f = n.as_f64().expect("f64");
                let s = fmt_sig(f, MACHINE_DIGITS);
                // Keep floats recognisable as floats.
                if s.contains(['.', 'e']) {
                    out.push_str(&s);
                } else {
                    out.push_str(&s);
                    out.push_str(".0");
                }
            } else {
                out.push_str(&n.to_string());
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            if items.iter().all(|i| !i.is_array() && !i.is_object()) {
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    write_json(out, item, depth + 1);
                }
                out.push(']');
                return;
            }
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                pad(out, depth + 1);
                write_json(out, item, depth + 1);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            pad(out, depth);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            for (i, (k, item)) in map.iter().enumerate() {
                pad(out, depth + 1);
                out.push_str(&Value::String(k.clone()).to_string());
                out.push_str(": ");
                write_json(out, item, depth + 1);
                out.push_str(if i + 1 < map.len() { ",\n" } else { "\n" });
            }
            pad(out, depth);
            out.push('}');
        }
    }
}

fn csv_opt(v: Option<f64>) -> String {
    v.map(|f| fmt_sig(f, MACHINE_DIGITS)).unwrap_or_default()
}

/// `iter,F,x1,...,xN`, one row per snapshot.
pub fn trajectory_csv(t: &Trajectory) -> String {
    let mut out = String::from("iter,F");
    for j in 1..=t.n_vars {
        write!(out, ",x{j}").unwrap();
    }
    out.push('\n');
    for s in t.snapshots() {
        write!(out, "{},{}", s.iter, fmt_sig(s.cost, MACHINE_DIGITS)).unwrap();
        for &x in &s.x {
            out.push(',');
            out.push_str(&fmt_sig(x, MACHINE_DIGITS));
        }
        out.push('\n');
    }
    out
}

/// `var,C_k,label`, one row per variable (1-based).
pub fn flow_labels_csv(labels: &[FlowLabel], clause_degree: &[usize]) -> String {
    let mut out = String::from("var,C_k,label\n");
    for (j, (label, c)) in labels.iter().zip(clause_degree).enumerate() {
        writeln!(out, "{},{},{}", j + 1, c, label).unwrap();
    }
    out
}

/// `r,M,N,instances,solver_success_frac,oracle_sat_frac,mean_runs_to_success`.
/// Missing values are empty fields.
pub fn sweep_csv(report: &SweepReport) -> String {
    let mut out =
        String::from("r,M,N,instances,solver_success_frac,oracle_sat_frac,mean_runs_to_success\n");
    for row in &report.rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            fmt_sig(row.r, MACHINE_DIGITS),
            row.m,
            row.n,
            row.instances,
            fmt_sig(row.solver_success_frac, MACHINE_DIGITS),
            csv_opt(row.oracle_sat_frac),
            csv_opt(row.mean_runs_to_success),
        )
        .unwrap();
    }
    out
}

pub fn sweep_json(report: &SweepReport) -> String {
    let rows: Vec<Value> = report
        .rows
        .iter()
        .map(|row| {
            let flows = row.flow_counts.as_ref().map(|c| {
                c.iter()
                    .map(|(l, n)| (l.as_str().to_string(), json!(n)))
                    .collect::<serde_json::Map<_, _>>()
            });
            json!({
                "r": row.r,
                "M": row.m,
                "N": row.n,
                "instances": row.instances,
                "solver_successes": row.solver_successes,
                "solver_success_frac": row.solver_success_frac,
                "oracle_sat": row.oracle_sat,
                "oracle_sat_frac": row.oracle_sat_frac,
                "oracle_sat_solver_failed": row.oracle_sat_solver_failed,
                "mean_runs_to_success": row.mean_runs_to_success,
                "certificates": row.certificates,
                "flow_counts": flows,
            })
        })
        .collect();
    to_json_string(&json!({
        "schema": SCHEMA_VERSION,
        "kind": "sweep",
        "config": report.config,
        "r_star": report.r_star(),
        "rows": rows,
    }))
}

/// Bundle of a trajectory and its flow labels as one JSON document.
pub fn trace_json(t: &Trajectory, labels: &[FlowLabel], clause_degree: &[usize]) -> String {
    let snapshots: Vec<Value> = t
        .snapshots()
        .iter()
        .map(|s| json!({"iter": s.iter, "F": s.cost, "x": s.x}))
        .collect();
    let flows: Vec<Value> = labels
        .iter()
        .zip(clause_degree)
        .enumerate()
        .map(|(j, (l, c))| json!({"var": j + 1, "C_k": c, "label": l.as_str()}))
        .collect();
    to_json_string(&json!({
        "schema": SCHEMA_VERSION,
        "kind": "trace",
        "seed": t.seed,
        "stride": t.stride,
        "trajectory": snapshots,
        "flows": flows,
    }))
}

fn status_str(s: RunStatus) -> &'static str {
    match s {
        RunStatus::Solved => "solved",
        RunStatus::ConvergedUnsolved => "converged-unsolved",
        RunStatus::IterationCap => "iteration-cap",
    }
}

/// Inputs of a solve report beyond the outcome itself.
#[derive(Debug, Clone, Serialize)]
pub struct SolveContext<'a> {
    pub instance_name: &'a str,
    pub n_vars: usize,
    pub n_clauses: usize,
    pub config: &'a SolverConfig,
    pub max_runs: u64,
    /// Assumed success probability and `k` for the give-up statement.
    pub assumed_q: f64,
    pub chebyshev_k: f64,
    pub stopping: StoppingRule,
}

pub fn solve_json(ctx: &SolveContext<'_>, outcome: &RestartOutcome) -> String {
    let runs: Vec<Value> = outcome
        .runs
        .iter()
        .enumerate()
        .map(|(i, r)| {
            json!({
                "run": i,
                "seed": r.seed,
                "status": status_str(r.status),
                "iterations": r.iterations,
                "final_cost": r.final_cost,
                "vertex_cost": r.vertex_cost,
                "certificate": r.certificate,
            })
        })
        .collect();
    let solution = outcome.solution().map(|r| {
        json!({
            "run": outcome.first_success,
            "z": r.rounded.bits().iter().map(|&b| b as u8).collect::<Vec<_>>(),
            "iterations": r.iterations,
            "certificate": r.certificate,
        })
    });
    let s = &outcome.stats;
    to_json_string(&json!({
        "schema": SCHEMA_VERSION,
        "kind": "solve",
        "instance": ctx.instance_name,
        "N": ctx.n_vars,
        "M": ctx.n_clauses,
        "config": ctx.config,
        "max_runs": ctx.max_runs,
        "solved": outcome.first_success.is_some(),
        "solution": solution,
        "certified": outcome.certified(),
        "stats": {
            "runs_attempted": s.runs_attempted,
            "successes": s.successes,
            "q_hat": s.q_hat,
            "n_s_hat": s.n_s_hat,
            "sigma_hat": s.sigma_hat,
        },
        "stopping_rule": {
            "assumed_q": ctx.assumed_q,
            "k": ctx.chebyshev_k,
            "required_runs": ctx.stopping.required_runs,
            "failure_prob_bound": ctx.stopping.failure_prob_bound,
        },
        "runs": runs,
    }))
}

pub fn config_text(c: &SolverConfig) -> String {
    format!(
        "eta = {}, radius = {}, max_iters = {}, tol = {}, seed = {}, record_every = {}",
        fmt_sig(c.eta, TEXT_DIGITS),
        fmt_sig(c.start_radius, TEXT_DIGITS),
        c.max_iters,
        fmt_sig(c.stop_tol, TEXT_DIGITS),
        c.seed,
        c.record_every
    )
}

pub fn solve_text(ctx: &SolveContext<'_>, outcome: &RestartOutcome) -> String {
    let t = |v: f64| fmt_sig(v, TEXT_DIGITS);
    let s = &outcome.stats;
    let mut out = String::new();
    writeln!(out, "c instance {} (N = {}, M = {})", ctx.instance_name, ctx.n_vars, ctx.n_clauses).unwrap();
    writeln!(out, "c config: {}, restarts = {}", config_text(ctx.config), ctx.max_runs).unwrap();
    match outcome.solution() {
        Some(r) => {
            writeln!(out, "Solved").unwrap();
            writeln!(out, "z = {}", r.rounded).unwrap();
            writeln!(out, "runs used = {}", s.runs_attempted).unwrap();
            writeln!(out, "iterations = {}", r.iterations).unwrap();
            writeln!(out, "certificate = {}", outcome.certified()).unwrap();
            writeln!(out, "q_hat = {}", t(s.q_hat)).unwrap();
        }
        None => {
            writeln!(out, "Failed").unwrap();
            writeln!(out, "runs attempted = {}, successes = {}", s.runs_attempted, s.successes).unwrap();
            writeln!(out, "q_hat = {}", t(s.q_hat)).unwrap();
            writeln!(out, "certificate = {}", outcome.certified()).unwrap();
            let rule = &ctx.stopping;
            let confidence = 1.0 - rule.failure_prob_bound;
            if s.runs_attempted >= rule.required_runs {
                writeln!(
                    out,
                    "assuming q = {} per run, {} failed runs reach the k = {} bound: no solution with confidence >= {}",
                    t(ctx.assumed_q),
                    s.runs_attempted,
                    t(ctx.chebyshev_k),
                    t(confidence)
                )
                .unwrap();
            } else {
                writeln!(
                    out,
                    "assuming q = {} per run, {} failed runs are needed for confidence >= {} (k = {}); {} attempted",
                    t(ctx.assumed_q),
                    rule.required_runs,
                    t(confidence),
                    t(ctx.chebyshev_k),
                    s.runs_attempted
                )
                .unwrap();
            }
        }
    }
    out
}
