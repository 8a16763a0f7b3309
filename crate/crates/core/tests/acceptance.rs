//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.
//!
//! Run a subset with `cargo test -p ec3 --test acceptance -- 4 7`.

use std::time::{Duration, Instant};

use ec3::flows::{clause_count, r_grid, FlowLabel, FlowThresholds, SweepConfig};
use ec3::instance::{brute_force_oracle, reference_instance_a, reference_solution_a, Assignment};
use ec3::report::{self, SolveContext};
use ec3::solver::{
    bsgd_run, chebyshev_tail, expected_trials, seeded_run, trial_variance, RestartPlan,
    SolverConfig,
};
use ec3::{
    classify_flows, generate_instance, initial_slope_check, phase_sweep, solve_with_restarts,
    stopping_rule, CostFunction, Instance,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Option<Duration>,
    check: fn() -> Verdict,
}

fn main() {
    let wanted: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let criteria = [
        Criterion { id: 1, name: "vertex spectrum exactness", limit: secs(5), check: vertex_spectrum },
        Criterion { id: 2, name: "harmonicity", limit: secs(5), check: harmonicity },
        Criterion { id: 3, name: "gradient correctness", limit: secs(10), check: gradient },
        Criterion { id: 4, name: "slope law", limit: None, check: slope_law },
        Criterion { id: 5, name: "case A reproduction", limit: secs(30), check: case_a },
        Criterion { id: 6, name: "case B/C analogues", limit: secs(600), check: cases_b_c },
        Criterion { id: 7, name: "oracle consistency", limit: secs(300), check: oracle_consistency },
        Criterion { id: 8, name: "phase-transition crossing", limit: secs(900), check: crossing },
        Criterion { id: 9, name: "flow universality", limit: secs(120), check: flow_universality },
        Criterion { id: 10, name: "restart statistics", limit: None, check: restart_statistics },
        Criterion { id: 11, name: "determinism", limit: None, check: determinism },
    ];

    let mut failures = 0;
    for c in criteria.iter().filter(|c| wanted.is_empty() || wanted.contains(&c.id)) {
        let start = Instant::now();
        let mut v = (c.check)();
        let elapsed = start.elapsed();
        if let Some(limit) = c.limit {
            if elapsed > limit {
                v.pass = false;
                v.detail.push_str(&format!("; runtime limit {limit:?} exceeded"));
            }
        }
        if !v.pass {
            failures += 1;
        }
        println!(
            "criterion {:>2} {:<27} {} ({:.2?}): {}",
            c.id,
            c.name,
            if v.pass { "PASS" } else { "FAIL" },
            elapsed,
            v.detail
        );
    }
    if failures > 0 {
        println!("{failures} criterion(s) failed");
        std::process::exit(1);
    }
}

fn secs(s: u64) -> Option<Duration> {
    Some(Duration::from_secs(s))
}

/// 50 instances with N ≤ 16 over a spread of clause counts.
fn small_instances() -> Vec<Instance> {
    (0..50u64)
        .map(|i| {
            let n = 6 + (i as usize % 11);
            let m = 1 + (i as usize * 7) % (2 * n);
            generate_instance(n, m, 1000 + i).unwrap()
        })
        .collect()
}

fn random_point(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(0.0..1.0)).collect()
}

fn vertex_spectrum() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut mismatches = 0;
    let mut checked = 0;
    for inst in small_instances() {
        let f = CostFunction::new(&inst);
        for _ in 0..200 {
            let z = Assignment::new((0..inst.n_vars()).map(|_| rng.random()).collect());
            let unsat = inst.check_assignment(&z).unwrap().unsatisfied_count;
            let cost = f.eval(&z.to_vertex()).unwrap();
            if cost != unsat as f64 {
                mismatches += 1;
            }
            checked += 1;
        }
    }
    verdict(
        mismatches == 0,
        format!("{checked} vertices, {mismatches} with F != unsatisfied count"),
    )
}

fn harmonicity() -> Verdict {
    let h = 1e-3;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for inst in small_instances() {
        let f = CostFunction::new(&inst);
        for _ in 0..100 {
            let mut x = random_point(inst.n_vars(), &mut rng);
            let f0 = f.eval(&x).unwrap();
            for j in 0..inst.n_vars() {
                let xj = x[j];
                x[j] = xj + h;
                let fp = f.eval(&x).unwrap();
                x[j] = xj - h;
                let fm = f.eval(&x).unwrap();
                x[j] = xj;
                worst = worst.max((fp - 2.0 * f0 + fm).abs());
            }
        }
    }
    verdict(
        worst < 1e-6,
        format!("max |second difference| = {worst:.3e} (h = {h}, bound 1e-6)"),
    )
}

fn gradient() -> Verdict {
    let h = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_rel = 0.0f64;
    let mut worst_saddle = 0.0f64;
    for inst in small_instances() {
        let f = CostFunction::new(&inst);
        for _ in 0..100 {
            let mut x = random_point(inst.n_vars(), &mut rng);
            let g = f.gradient(&x).unwrap();
            for j in 0..inst.n_vars() {
                let xj = x[j];
                x[j] = xj + h;
                let fp = f.eval(&x).unwrap();
                x[j] = xj - h;
                let fm = f.eval(&x).unwrap();
                x[j] = xj;
                let fd = (fp - fm) / (2.0 * h);
                worst_rel = worst_rel.max((g[j] - fd).abs() / g[j].abs().max(1.0));
            }
        }
        let saddle = vec![2.0 / 3.0; inst.n_vars()];
        for g in f.gradient(&saddle).unwrap() {
            worst_saddle = worst_saddle.max(g.abs());
        }
    }
    verdict(
        worst_rel <= 1e-6 && worst_saddle <= 1e-15,
        format!(
            "max relative FD error = {worst_rel:.3e} (bound 1e-6), max |grad| at saddle = {worst_saddle:.3e} (bound 1e-15)"
        ),
    )
}

fn slope_law() -> Verdict {
    let eta = 0.005;
    let instances = [
        reference_instance_a(),
        generate_instance(100, 40, 0).unwrap(),
        generate_instance(1000, 250, 0).unwrap(),
    ];
    let mut center_step_rel = 0.0f64;
    let mut center_iterate_rel = 0.0f64;
    let mut center_difference_rel = 0.0f64;
    let mut sphere_abs = 0.0f64;
    let mut integer_dev = 0.0f64;
    for inst in &instances {
        let f = CostFunction::new(inst);
        let n = inst.n_vars();
        let degree = inst.clause_degree();

        // Exact center: the update adds -eta * grad to every coordinate.
        let center = vec![0.5; n];
        let g = f.gradient(&center).unwrap();
        let one_step = SolverConfig {
            eta,
            max_iters: 1,
            ..SolverConfig::default()
        };
        let run = bsgd_run(&f, &one_step, &center).unwrap();
        for k in 0..n {
            let predicted = eta * degree[k] as f64 / 4.0;
            let applied = -eta * g[k];
            if predicted > 0.0 {
                center_step_rel = center_step_rel.max((applied - predicted).abs() / predicted);
            } else if applied != 0.0 {
                center_step_rel = f64::INFINITY;
            }
            let x2 = run.final_point[k];
            center_iterate_rel = center_iterate_rel.max((x2 - (0.5 + predicted)).abs() / x2);
            if predicted > 0.0 {
                let diff = ((x2 - 0.5) - predicted).abs() / predicted;
                center_difference_rel = center_difference_rel.max(diff);
            }
        }

        // Sphere starts and the discreteness of displacement / (eta/4).
        for seed in 0..10 {
            let config = SolverConfig {
                eta,
                seed,
                max_iters: 2,
                record_trajectory: true,
                ..SolverConfig::default()
            };
            let run = seeded_run(&f, &config, 0).unwrap();
            let t = run.trajectory.unwrap();
            for s in initial_slope_check(&t, eta, degree).unwrap() {
                sphere_abs = sphere_abs.max((s.observed - s.predicted).abs());
                if n >= 100 {
                    let units = s.observed / (eta / 4.0);
                    integer_dev = integer_dev.max((units - units.round()).abs());
                }
            }
        }
    }
    let pass = center_step_rel <= 1e-15
        && center_iterate_rel <= 1e-15
        && sphere_abs <= 0.1 * eta
        && integer_dev <= 0.1;
    verdict(
        pass,
        format!(
            "center: step rel err {center_step_rel:.1e}, iterate rel err {center_iterate_rel:.1e} \
             (stored x2 - x1 rel err {center_difference_rel:.1e}, rounding of x2 at 1/2); \
             sphere: max |obs - pred| = {sphere_abs:.3e} (bound {:.1e}); \
             max distance of displacement/(eta/4) from an integer (N >= 100) = {integer_dev:.3}",
            0.1 * eta
        ),
    )
}

fn case_a() -> Verdict {
    let inst = reference_instance_a();
    let z = reference_solution_a();
    let printed_ok = inst.check_assignment(&z).unwrap().satisfied;
    let f = CostFunction::new(&inst);
    let mut solved = 0;
    let mut first_run = 0;
    for seed in 0..10 {
        let config = SolverConfig {
            seed,
            ..SolverConfig::default()
        };
        let out = solve_with_restarts(&f, &config, RestartPlan::new(5)).unwrap();
        if let Some(i) = out.first_success {
            solved += 1;
            if i == 0 {
                first_run += 1;
            }
        }
    }
    verdict(
        printed_ok && solved >= 9,
        format!(
            "printed Z satisfies all clauses: {printed_ok}; solved within 5 runs for {solved}/10 seeds ({first_run} on the first run)"
        ),
    )
}

fn cases_b_c() -> Verdict {
    let mut parts = Vec::new();
    let mut pass = true;
    for (n, m) in [(100, 40), (1000, 250)] {
        let mut solved = 0;
        let mut runs = Vec::new();
        for seed in 0..10u64 {
            let inst = generate_instance(n, m, seed).unwrap();
            let f = CostFunction::new(&inst);
            let config = SolverConfig {
                seed,
                ..SolverConfig::default()
            };
            let out = solve_with_restarts(&f, &config, RestartPlan::new(10)).unwrap();
            match out.first_success {
                Some(i) => {
                    solved += 1;
                    runs.push((i + 1).to_string());
                }
                None => runs.push("-".into()),
            }
        }
        pass &= solved >= 8;
        parts.push(format!(
            "(N={n}, M={m}) solved within 10 runs for {solved}/10 seeds [runs used: {}]",
            runs.join(" ")
        ));
    }
    verdict(pass, parts.join("; "))
}

fn oracle_consistency() -> Verdict {
    let mut solved = 0;
    let mut certified = 0;
    let mut sat = 0;
    let mut false_solved = 0;
    let mut false_cert = 0;
    for i in 0..200u64 {
        let n = 10 + (i as usize % 11);
        let r = 0.2 + 0.7 * i as f64 / 199.0;
        let m = clause_count(r, n).max(1);
        let inst = generate_instance(n, m, 5000 + i).unwrap();
        let is_sat = brute_force_oracle(&inst, 20).unwrap().is_sat();
        let f = CostFunction::new(&inst);
        let config = SolverConfig {
            seed: i,
            ..SolverConfig::default()
        };
        let out = solve_with_restarts(&f, &config, RestartPlan::new(10).exhaustive()).unwrap();
        let any_solved = out.runs.iter().any(|r| r.solved());
        let any_cert = out.certified();
        sat += is_sat as u32;
        solved += any_solved as u32;
        certified += any_cert as u32;
        false_solved += (any_solved && !is_sat) as u32;
        false_cert += (any_cert && !is_sat) as u32;
    }
    verdict(
        false_solved == 0 && false_cert == 0,
        format!(
            "200 instances: {sat} oracle-SAT, {solved} solved, {certified} certified; \
             false solved = {false_solved}, false certificates = {false_cert}"
        ),
    )
}

fn crossing() -> Verdict {
    let mut cfg = SweepConfig::new(24, r_grid(0.3, 0.9, 0.05).unwrap(), 200);
    cfg.oracle = true;
    cfg.base_seed = 8;
    let rep = phase_sweep(&cfg).unwrap();
    let fracs: Vec<String> = rep
        .rows
        .iter()
        .map(|row| format!("{:.2}:{:.3}", row.r, row.oracle_sat_frac.unwrap()))
        .collect();
    match rep.r_star() {
        Some(r) => verdict(
            (0.45..=0.80).contains(&r),
            format!("r* = {r:.4} (band [0.45, 0.80]); SAT fraction {}", fracs.join(" ")),
        ),
        None => verdict(false, format!("no crossing of 1/2; SAT fraction {}", fracs.join(" "))),
    }
}

fn flow_universality() -> Verdict {
    let n = 1000;
    let m = clause_count(0.025, n);
    let inst = generate_instance(n, m, 9).unwrap();
    let f = CostFunction::new(&inst);
    let config = SolverConfig {
        seed: 9,
        ..SolverConfig::default()
    };
    let out = solve_with_restarts(&f, &config, RestartPlan::new(10)).unwrap();
    let Some(index) = out.first_success else {
        return verdict(false, "no successful run to classify");
    };
    let traced = SolverConfig {
        record_trajectory: true,
        ..config
    };
    let run = seeded_run(&f, &traced, index).unwrap();
    let labels = classify_flows(run.trajectory.as_ref().unwrap(), &FlowThresholds::default()).unwrap();
    let regular = labels.iter().filter(|&&l| l != FlowLabel::Irregular).count();
    let degree = inst.clause_degree();
    let idle = degree.iter().filter(|&&c| c == 0).count();
    let idle_v = (0..n)
        .filter(|&k| degree[k] == 0 && labels[k] == FlowLabel::V)
        .count();
    let frac = regular as f64 / n as f64;
    let counts: Vec<String> = ec3::flows::label_counts(&labels)
        .into_iter()
        .filter(|(_, c)| *c > 0)
        .map(|(l, c)| format!("{l}={c}"))
        .collect();
    verdict(
        frac >= 0.9 && idle_v == idle,
        format!(
            "M = {m}: {:.1}% non-Irregular; {idle_v}/{idle} zero-degree variables labeled V; {}",
            100.0 * frac,
            counts.join(" ")
        ),
    )
}

fn restart_statistics() -> Verdict {
    let mut worst_bound = 0.0f64;
    let mut worst_closed = 0.0f64;
    for i in 1..=9 {
        let q = i as f64 / 10.0;
        let rule = stopping_rule(q, 11.0).unwrap();
        worst_bound = worst_bound.max(rule.failure_prob_bound);
        worst_closed = worst_closed
            .max((expected_trials(q) - 1.0 / q).abs())
            .max((trial_variance(q) - (1.0 - q) / (q * q)).abs())
            .max((rule.failure_prob_bound - chebyshev_tail(q, 11.0)).abs());
    }

    let q = 0.3;
    let episodes = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut total = 0u64;
    for _ in 0..episodes {
        let mut trials = 1u64;
        while !rng.random_bool(q) {
            trials += 1;
        }
        total += trials;
    }
    let mean = total as f64 / episodes as f64;
    let rel = (mean - expected_trials(q)).abs() / expected_trials(q);
    verdict(
        worst_bound < 0.01 && worst_closed <= 1e-12 && rel <= 0.02,
        format!(
            "max failure bound (k = 11) = {worst_bound:.5}; closed-form max error = {worst_closed:.1e}; \
             simulated mean runs at q = 0.3: {mean:.4} vs {:.4} (rel {rel:.2e})",
            expected_trials(q)
        ),
    )
}

fn with_workers<R: Send>(w: usize, f: impl FnOnce() -> R + Send) -> R {
    rayon::ThreadPoolBuilder::new()
        .num_threads(w)
        .build()
        .unwrap()
        .install(f)
}

fn determinism() -> Verdict {
    let instances = [
        ("case-a", reference_instance_a()),
        ("b-seed-2", generate_instance(100, 40, 2).unwrap()),
        ("unsat-like", generate_instance(12, 11, 4).unwrap()),
    ];
    let mut diffs = Vec::new();
    for (name, inst) in &instances {
        let f = CostFunction::new(inst);
        let config = SolverConfig {
            seed: 77,
            ..SolverConfig::default()
        };
        let reports: Vec<String> = [1usize, 4, 8]
            .iter()
            .map(|&w| {
                with_workers(w, || {
                    let out =
                        solve_with_restarts(&f, &config, RestartPlan::new(12).workers(w)).unwrap();
                    let ctx = SolveContext {
                        instance_name: name,
                        n_vars: inst.n_vars(),
                        n_clauses: inst.n_clauses(),
                        config: &config,
                        max_runs: 12,
                        assumed_q: 0.25,
                        chebyshev_k: 11.0,
                        stopping: stopping_rule(0.25, 11.0).unwrap(),
                    };
                    report::solve_json(&ctx, &out) + &report::solve_text(&ctx, &out)
                })
            })
            .collect();
        if reports.iter().any(|r| r != &reports[0]) {
            diffs.push(format!("solve report for {name}"));
        }
    }

    let mut cfg = SweepConfig::new(14, r_grid(0.3, 0.9, 0.15).unwrap(), 12);
    cfg.oracle = true;
    cfg.flows = true;
    cfg.base_seed = 11;
    let sweeps: Vec<(String, String)> = [1usize, 4, 8]
        .iter()
        .map(|&w| {
            with_workers(w, || {
                let rep = phase_sweep(&cfg).unwrap();
                (report::sweep_csv(&rep), report::sweep_json(&rep))
            })
        })
        .collect();
    if sweeps.iter().any(|s| s != &sweeps[0]) {
        diffs.push("sweep output".into());
    }
    verdict(
        diffs.is_empty(),
        if diffs.is_empty() {
            "solve reports (3 instances) and sweep CSV/JSON identical for 1, 4 and 8 workers".to_string()
        } else {
            format!("differences in {}", diffs.join(", "))
        },
    )
}
