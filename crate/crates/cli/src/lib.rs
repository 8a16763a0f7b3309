//! `ec3` command-line front end.
//!
//! Exit codes: 0 solved / satisfiable / report written, 1 not solved within
//! budget / unsatisfiable / assignment rejected, 2 usage or input error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use ec3::flows::{self, label_counts, r_grid, FlowThresholds, SweepConfig};
use ec3::instance::{self, DEFAULT_ORACLE_CAP};
use ec3::report::{self, fmt_sig, SolveContext, TEXT_DIGITS};
use ec3::solver::{seeded_run, RestartPlan};
use ec3::{
    brute_force_oracle, classify_flows, generate_instance, parse_assignment, parse_instance,
    solve_with_restarts, stopping_rule, CostFunction, Instance, OracleVerdict, SolverConfig,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "ec3", version, about = "Exact cover (1-in-3 SAT) by baby-steps gradient descent")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a random instance.
    Generate(GenerateArgs),
    /// Solve an instance with restarts.
    Solve(SolveArgs),
    /// Decide an instance exactly by enumeration.
    Oracle(OracleArgs),
    /// Check an assignment file against an instance.
    Verify(VerifyArgs),
    /// Sweep the clauses-to-variables ratio.
    Sweep(SweepArgs),
    /// Solve and record the full trajectory with flow labels.
    Trace(TraceArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Step size.
    #[arg(long, default_value_t = 0.005)]
    pub eta: f64,
    /// Radius of the start sphere around (1/2, ..., 1/2).
    #[arg(long, default_value_t = 0.05)]
    pub radius: f64,
    #[arg(long, default_value_t = 1_000_000)]
    pub max_iters: u64,
    /// Largest coordinate change still counted as converged.
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Restart budget.
    #[arg(long, default_value_t = 10)]
    pub restarts: u64,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Trajectory sampling stride.
    #[arg(long, default_value_t = 10)]
    pub record_every: u64,
}

impl SolverArgs {
    pub fn config(&self) -> SolverConfig {
        SolverConfig {
            eta: self.eta,
            start_radius: self.radius,
            max_iters: self.max_iters,
            stop_tol: self.tol,
            seed: self.seed,
            record_every: self.record_every,
            record_trajectory: false,
        }
    }

    pub fn workers(&self) -> usize {
        self.workers.unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(short = 'n', long = "vars")]
    pub n_vars: usize,
    #[arg(short = 'm', long = "clauses")]
    pub n_clauses: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Instance file to write; stdout when omitted.
    #[arg(short = 'o', long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    pub instance: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Assumed single-run success probability for the give-up statement.
    #[arg(long, default_value_t = 0.25)]
    pub assume_q: f64,
    /// Chebyshev multiple `k` of the expected number of runs.
    #[arg(long, default_value_t = 11.0)]
    pub k: f64,
    /// Write the trajectory of the reported run as CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Machine-readable report file.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    pub instance: PathBuf,
    #[arg(long, default_value_t = DEFAULT_ORACLE_CAP)]
    pub cap: usize,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    pub instance: PathBuf,
    /// One line of N space-separated 0/1 values.
    pub assignment: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(short = 'n', long = "vars")]
    pub n_vars: usize,
    #[arg(long)]
    pub r_from: f64,
    #[arg(long)]
    pub r_to: f64,
    #[arg(long)]
    pub step: f64,
    #[arg(long, default_value_t = 20)]
    pub per_r: usize,
    /// Record exact satisfiability (requires N within the oracle cap).
    #[arg(long)]
    pub oracle: bool,
    #[arg(long, default_value_t = DEFAULT_ORACLE_CAP)]
    pub cap: usize,
    /// Classify the flows of successful runs.
    #[arg(long)]
    pub flows: bool,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    pub instance: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Trajectory CSV (or the combined JSON document with `--format json`).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Flow labels CSV.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

/// Failure that maps to exit code 2.
#[derive(Debug)]
pub struct CliError(pub String);

impl<E: std::fmt::Display> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError(e.to_string())
    }
}

type CmdResult = Result<i32, CliError>;

/// Parses `args` (including the program name) and runs the command.
pub fn run_from<I, T>(args: I, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli, out, err),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            code
        }
    }
}

pub fn run(cli: Cli, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> i32 {
    let workers = match &cli.command {
        Command::Solve(a) => a.solver.workers(),
        Command::Sweep(a) => a.solver.workers(),
        Command::Trace(a) => a.solver.workers(),
        Command::Oracle(a) => a.workers.unwrap_or(1),
        _ => 1,
    };
    let pool = match rayon_pool(workers) {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.0);
            return EXIT_ERROR;
        }
    };
    let result = pool.install(|| match cli.command {
        Command::Generate(a) => cmd_generate(&a, out),
        Command::Solve(a) => cmd_solve(&a, out),
        Command::Oracle(a) => cmd_oracle(&a, out),
        Command::Verify(a) => cmd_verify(&a, out),
        Command::Sweep(a) => cmd_sweep(&a, out),
        Command::Trace(a) => cmd_trace(&a, out),
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.0);
            EXIT_ERROR
        }
    }
}

fn rayon_pool(workers: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(CliError::from)
}

fn read_instance(path: &Path) -> Result<Instance, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError(format!("cannot read {}: {e}", path.display())))?;
    parse_instance(&text).map_err(|e| CliError(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError(format!("cannot write {}: {e}", path.display())))
}

fn txt(v: f64) -> String {
    fmt_sig(v, TEXT_DIGITS)
}

fn warn_duplicates(instance: &Instance, out: &mut (dyn Write + Send)) -> Result<(), CliError> {
    for (a, b) in instance.duplicate_clauses() {
        writeln!(out, "c warning: clause {} duplicates clause {}", b + 1, a + 1)?;
    }
    Ok(())
}

pub fn cmd_generate(a: &GenerateArgs, out: &mut (dyn Write + Send)) -> CmdResult {
    let inst = generate_instance(a.n_vars, a.n_clauses, a.seed)?;
    let r = inst.ratio();
    let text = format!(
        "c generated: N = {}, M = {}, seed = {}, r = {}\n{}",
        a.n_vars,
        a.n_clauses,
        a.seed,
        txt(r),
        inst
    );
    match &a.output {
        Some(path) => {
            write_file(path, &text)?;
            writeln!(out, "c generate: N = {}, M = {}, seed = {}", a.n_vars, a.n_clauses, a.seed)?;
            writeln!(out, "wrote {}", path.display())?;
            writeln!(out, "r = {}", txt(r))?;
        }
        None => out.write_all(text.as_bytes())?,
    }
    Ok(EXIT_OK)
}

pub fn cmd_solve(a: &SolveArgs, out: &mut (dyn Write + Send)) -> CmdResult {
    let inst = read_instance(&a.instance)?;
    warn_duplicates(&inst, out)?;
    let f = CostFunction::new(&inst);
    let config = a.solver.config();
    let plan = RestartPlan::new(a.solver.restarts).workers(a.solver.workers());
    let outcome = solve_with_restarts(&f, &config, plan)?;
    let stopping = stopping_rule(a.assume_q, a.k)?;
    let name = a.instance.display().to_string();
    let ctx = SolveContext {
        instance_name: &name,
        n_vars: inst.n_vars(),
        n_clauses: inst.n_clauses(),
        config: &config,
        max_runs: a.solver.restarts,
        assumed_q: a.assume_q,
        chebyshev_k: a.k,
        stopping,
    };
    out.write_all(report::solve_text(&ctx, &outcome).as_bytes())?;

    if let Some(path) = &a.output {
        let body = match a.format {
            Format::Json => report::solve_json(&ctx, &outcome),
            Format::Csv => solve_runs_csv(&outcome),
        };
        write_file(path, &body)?;
    }
    if let Some(path) = &a.trace {
        let index = outcome
            .first_success
            .unwrap_or(outcome.runs.len() as u64 - 1);
        let traced = SolverConfig {
            record_trajectory: true,
            ..config.clone()
        };
        let run = seeded_run(&f, &traced, index)?;
        let t = run.trajectory.expect("recording enabled");
        write_file(path, &report::trajectory_csv(&t))?;
        writeln!(out, "c trajectory of run {} written to {}", index, path.display())?;
    }
    Ok(if outcome.first_success.is_some() {
        EXIT_OK
    } else {
        EXIT_NEGATIVE
    })
}

fn solve_runs_csv(outcome: &ec3::RestartOutcome) -> String {
    let mut s = String::from("run,seed,status,iterations,final_cost,vertex_cost,certificate\n");
    for (i, r) in outcome.runs.iter().enumerate() {
        s.push_str(&format!(
            "{},{},{:?},{},{},{},{}\n",
            i,
            r.seed.unwrap_or_default(),
            r.status,
            r.iterations,
            fmt_sig(r.final_cost, report::MACHINE_DIGITS),
            fmt_sig(r.vertex_cost, report::MACHINE_DIGITS),
            r.certificate
        ));
    }
    s
}

pub fn cmd_oracle(a: &OracleArgs, out: &mut (dyn Write + Send)) -> CmdResult {
    let inst = read_instance(&a.instance)?;
    writeln!(
        out,
        "c oracle: N = {}, M = {}, cap = {}",
        inst.n_vars(),
        inst.n_clauses(),
        a.cap
    )?;
    match brute_force_oracle(&inst, a.cap)? {
        OracleVerdict::Sat { witness, count } => {
            writeln!(out, "SAT")?;
            writeln!(out, "z = {witness}")?;
            writeln!(out, "solutions = {count}")?;
            Ok(EXIT_OK)
        }
        OracleVerdict::Unsat => {
            writeln!(out, "UNSAT")?;
            Ok(EXIT_NEGATIVE)
        }
    }
}

pub fn cmd_verify(a: &VerifyArgs, out: &mut (dyn Write + Send)) -> CmdResult {
    let inst = read_instance(&a.instance)?;
    let text = fs::read_to_string(&a.assignment)
        .map_err(|e| CliError(format!("cannot read {}: {e}", a.assignment.display())))?;
    let z = parse_assignment(&text)?;
    let check = inst.check_assignment(&z)?;
    let f = CostFunction::new(&inst);
    let spectrum = f.vertex_spectrum_check(&z)?;
    writeln!(out, "c verify: N = {}, M = {}", inst.n_vars(), inst.n_clauses())?;
    writeln!(
        out,
        "{}",
        if check.satisfied { "satisfied" } else { "unsatisfied" }
    )?;
    writeln!(out, "unsatisfied clauses = {}", check.unsatisfied_count)?;
    writeln!(out, "F at vertex = {}", txt(spectrum.cost_at_vertex))?;
    Ok(if check.satisfied { EXIT_OK } else { EXIT_NEGATIVE })
}

pub fn cmd_sweep(a: &SweepArgs, out: &mut (dyn Write + Send)) -> CmdResult {
    let grid = r_grid(a.r_from, a.r_to, a.step)?;
    let mut cfg = SweepConfig::new(a.n_vars, grid, a.per_r);
    cfg.solver = a.solver.config();
    cfg.run_budget = a.solver.restarts;
    cfg.base_seed = a.solver.seed;
    cfg.oracle = a.oracle;
    cfg.oracle_cap = a.cap;
    cfg.flows = a.flows;
    if a.oracle && a.n_vars > a.cap.min(instance::MAX_ORACLE_CAP) {
        return Err(CliError(format!(
            "N = {} exceeds the oracle cap {}",
            a.n_vars, a.cap
        )));
    }
    writeln!(
        out,
        "c sweep: N = {}, r = {}..{} step {}, per r = {}, oracle = {}, flows = {}",
        a.n_vars,
        txt(a.r_from),
        txt(a.r_to),
        txt(a.step),
        a.per_r,
        a.oracle,
        a.flows
    )?;
    writeln!(
        out,
        "c config: {}, restarts = {}",
        report::config_text(&cfg.solver),
        cfg.run_budget
    )?;
    let rep = flows::phase_sweep(&cfg)?;
    writeln!(out, "r\tM\tsolved\tsat\tmean_runs")?;
    for row in &rep.rows {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            txt(row.r),
            row.m,
            txt(row.solver_success_frac),
            row.oracle_sat_frac.map(txt).unwrap_or_else(|| "-".into()),
            row.mean_runs_to_success.map(txt).unwrap_or_else(|| "-".into()),
        )?;
    }
    if a.oracle {
        match rep.r_star() {
            Some(r) => writeln!(out, "r* estimate = {}", txt(r))?,
            None => writeln!(out, "r* estimate unavailable: no crossing of 1/2 in the grid")?,
        }
    }
    let body = match a.format {
        Format::Csv => report::sweep_csv(&rep),
        Format::Json => report::sweep_json(&rep),
    };
    match &a.output {
        Some(path) => write_file(path, &body)?,
        None => out.write_all(body.as_bytes())?,
    }
    Ok(EXIT_OK)
}

pub fn cmd_trace(a: &TraceArgs, out: &mut (dyn Write + Send)) -> CmdResult {
    let inst = read_instance(&a.instance)?;
    let f = CostFunction::new(&inst);
    let config = a.solver.config();
    let plan = RestartPlan::new(a.solver.restarts).workers(a.solver.workers());
    let outcome = solve_with_restarts(&f, &config, plan)?;
    let index = outcome
        .first_success
        .unwrap_or(outcome.runs.len() as u64 - 1);
    let traced = SolverConfig {
        record_trajectory: true,
        ..config.clone()
    };
    let run = seeded_run(&f, &traced, index)?;
    let t = run.trajectory.as_ref().expect("recording enabled");
    let labels = classify_flows(t, &FlowThresholds::default())?;
    let slopes = flows::initial_slope_check(t, config.eta, inst.clause_degree())?;

    writeln!(out, "c trace: {}", a.instance.display())?;
    writeln!(out, "c config: {}, restarts = {}", report::config_text(&config), a.solver.restarts)?;
    writeln!(
        out,
        "run {} {:?}: iterations = {}, F = {}",
        index,
        run.status,
        run.iterations,
        txt(run.final_cost)
    )?;
    writeln!(
        out,
        "slope law holds for {}/{} variables",
        slopes.iter().filter(|s| s.ok).count(),
        slopes.len()
    )?;
    for (label, count) in label_counts(&labels) {
        writeln!(out, "{label}\t{count}")?;
    }
    match a.format {
        Format::Csv => {
            let traj = report::trajectory_csv(t);
            match &a.output {
                Some(path) => write_file(path, &traj)?,
                None => out.write_all(traj.as_bytes())?,
            }
            if let Some(path) = &a.labels {
                write_file(path, &report::flow_labels_csv(&labels, inst.clause_degree()))?;
            }
        }
        Format::Json => {
            let doc = report::trace_json(t, &labels, inst.clause_degree());
            match &a.output {
                Some(path) => write_file(path, &doc)?,
                None => out.write_all(doc.as_bytes())?,
            }
        }
    }
    Ok(if run.solved() { EXIT_OK } else { EXIT_NEGATIVE })
}
