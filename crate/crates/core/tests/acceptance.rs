//! Acceptance suite. Runs without the libtest harness so every criterion prints
//! one PASS/FAIL line; exits nonzero when any criterion fails.

mod common;

use std::fmt::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use ruc_core::backend::MathProgram;
use ruc_core::dispatch::{reserve_rule, solve_deterministic_uc, DetUcOptions, EdKind};
use ruc_core::model::{Commitment, CommitmentSchedule, PowerSystem};
use ruc_core::robust::{
    audit_solution, build_robust_rows, screen_row, solve_robust_uc, PolicyVars, RobustOptions,
    UcSolution,
};
use ruc_core::simulation::{
    cvar, logs_to_csv, nonanticipativity_gap, run_simulation, SimulationConfig, SimulationReport,
};
use ruc_core::uncertainty::{
    cholesky_psd, fit_var, reduce_dimension, simulate_paths, DynamicUncertaintySet, MemberSampler,
    NormKind, SetOracle, StochasticModel,
};
use ruc_core::Error;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

const GAP: f64 = 0.01;

fn default_opts() -> RobustOptions {
    RobustOptions {
        mip_gap: GAP,
        ..RobustOptions::default()
    }
}

/// Randomized instances that admit a robust solution, with the solution.
fn solved_random_instances(
    count: usize,
    seed: u64,
) -> Vec<(PowerSystem, DynamicUncertaintySet, UcSolution)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let mut attempts = 0;
    while out.len() < count && attempts < 20 * count {
        attempts += 1;
        let buses = rng.gen_range(1..=3);
        let horizon = rng.gen_range(2..=4);
        let (system, set) = random_instance(&mut rng, buses, horizon);
        match solve_robust_uc(&system, &set, &default_opts()) {
            Ok(sol) => out.push((system, set, sol)),
            Err(Error::Infeasible(_)) => {}
            Err(e) => panic!("instance {attempts}: {e}"),
        }
    }
    out
}

fn criterion_1(instances: &mut Vec<(PowerSystem, DynamicUncertaintySet, UcSolution)>) -> Outcome {
    let started = Instant::now();
    *instances = solved_random_instances(50, 1);
    ensure!(
        instances.len() == 50,
        "only {} feasible random instances",
        instances.len()
    );
    let mut worst = f64::NEG_INFINITY;
    for (k, (system, set, sol)) in instances.iter().enumerate() {
        let audit = audit_solution(system, set, sol, 1e-6).map_err(|e| e.to_string())?;
        ensure!(
            audit.violations.is_empty(),
            "instance {k}: {:?}",
            audit.violations
        );
        worst = worst.max(audit.max_excess);
    }
    let total = started.elapsed().as_secs_f64();
    ensure!(total < 120.0, "took {total:.1} s");
    Ok(format!(
        "50 instances, worst row excess {worst:.2e}, {total:.1} s"
    ))
}

fn criterion_2(instances: &[(PowerSystem, DynamicUncertaintySet, UcSolution)]) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut cases: Vec<(PowerSystem, DynamicUncertaintySet, UcSolution)> =
        instances.iter().take(10).cloned().collect();
    for name in ["one_bus", "three_bus", "six_bus"] {
        let (system, set) = bundled(name);
        let sol = solve_robust_uc(&system, &set, &default_opts()).map_err(|e| e.to_string())?;
        cases.push((system, set, sol));
    }
    let mut worst = 0.0_f64;
    for (system, set, sol) in &cases {
        let sampler = MemberSampler::new(set, 50, &mut rng).map_err(|e| e.to_string())?;
        let members: Vec<_> = (0..1000).map(|_| sampler.sample(&mut rng)).collect();
        worst = worst.max(max_imbalance(system, &sol.policy, &members));
    }
    ensure!(worst <= 1e-7, "imbalance {worst:.3e} MW");
    Ok(format!(
        "{} policies × 1000 members, max imbalance {worst:.2e} MW",
        cases.len()
    ))
}

fn criterion_3(log: &mut String) -> Outcome {
    let (system, base) = bundled("six_bus");
    let mut diffs = Vec::new();
    for gamma in [0.25, 0.5, 1.0, 2.0, 3.0, 4.0] {
        let set = DynamicUncertaintySet {
            gamma,
            ..base.clone()
        };
        let oa = solve_robust_uc(&system, &set, &default_opts()).map_err(|e| e.to_string())?;
        let exact = solve_robust_uc(
            &system,
            &set,
            &RobustOptions {
                outer_approximation: false,
                monolithic: true,
                ..default_opts()
            },
        )
        .map_err(|e| e.to_string())?;
        ensure!(
            oa.certified && exact.certified,
            "Γ={gamma}: uncertified solve"
        );
        ensure!(
            oa.objective >= exact.objective - GAP * exact.objective.abs(),
            "Γ={gamma}: z_OA {} < z_exact {}",
            oa.objective,
            exact.objective
        );
        let rel = (oa.objective - exact.objective) / exact.objective.abs();
        let _ = writeln!(
            log,
            "oa_vs_exact gamma={gamma} z_oa={} z_exact={} rel={rel:.5}",
            oa.objective, exact.objective
        );
        diffs.push(rel);
    }
    let rising = diffs.windows(2).filter(|w| w[1] >= w[0] - 1e-9).count();
    Ok(format!(
        "relative differences {:?}, nondecreasing in {rising}/{} steps",
        diffs
            .iter()
            .map(|d| format!("{:.3}%", 100.0 * d))
            .collect::<Vec<_>>(),
        diffs.len() - 1
    ))
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cg = RobustOptions {
        outer_approximation: false,
        ..default_opts()
    };
    let mono = RobustOptions {
        monolithic: true,
        ..cg.clone()
    };
    let (mut compared, mut worst) = (0, 0.0_f64);
    let mut attempts = 0;
    while compared < 10 && attempts < 200 {
        attempts += 1;
        let (system, set) = random_instance(&mut rng, 2, 3);
        match (
            solve_robust_uc(&system, &set, &cg),
            solve_robust_uc(&system, &set, &mono),
        ) {
            (Ok(a), Ok(b)) => {
                let rel = (a.objective - b.objective).abs() / a.objective.abs().max(1.0);
                ensure!(rel <= 2.0 * GAP, "{} vs {}", a.objective, b.objective);
                worst = worst.max(rel);
                compared += 1;
            }
            (Err(Error::Infeasible(_)), Err(Error::Infeasible(_))) => {}
            (a, b) => {
                return Err(format!(
                    "routes disagree: {:?} / {:?}",
                    a.map(|s| s.objective).map_err(|e| e.to_string()),
                    b.map(|s| s.objective).map_err(|e| e.to_string())
                ))
            }
        }
    }
    ensure!(compared == 10, "only {compared} feasible instances");
    Ok(format!(
        "10 instances, largest relative difference {worst:.2e}"
    ))
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut pairs = 0;
    while pairs < 1000 {
        let buses = rng.gen_range(1..=3);
        let (system, set) = random_instance(&mut rng, buses, 3);
        let oracle = SetOracle::new(&set).map_err(|e| e.to_string())?;
        let extrema = oracle.extrema().map_err(|e| e.to_string())?;
        let schedule = CommitmentSchedule::from_on(
            &system,
            vec![vec![true; system.horizon]; system.generators.len()],
        );
        let mut program = MathProgram::new();
        let pv = PolicyVars::new(&mut program, &system, true);
        let rows = build_robust_rows(&system, Commitment::Fixed(&schedule), &pv);
        for _ in 0..10 {
            let values: Vec<f64> = (0..program.num_vars())
                .map(|_| rng.gen_range(-2.0..2.0) * 10.0)
                .collect();
            let row = &rows[rng.gen_range(0..rows.len())];
            let w = row.weights(&values, set.num_units(), set.horizon());
            let exact = oracle.maximize(&w).map_err(|e| e.to_string())?.value;
            let bound = screen_row(row, &values, &extrema);
            ensure!(
                bound >= exact - 1e-7 * exact.abs().max(1.0),
                "{}: bound {bound} < LP {exact}",
                row.name
            );
            pairs += 1;
        }
    }
    for name in ["one_bus", "three_bus", "six_bus"] {
        let (system, set) = bundled(name);
        let on = solve_robust_uc(&system, &set, &default_opts()).map_err(|e| e.to_string())?;
        let off = solve_robust_uc(
            &system,
            &set,
            &RobustOptions {
                screening: false,
                ..default_opts()
            },
        )
        .map_err(|e| e.to_string())?;
        ensure!(
            on.certified == off.certified,
            "{name}: certification differs"
        );
        ensure!(
            (on.objective - off.objective).abs() <= GAP * on.objective.abs(),
            "{name}: {} vs {}",
            on.objective,
            off.objective
        );
    }
    Ok("1000 (W, set) pairs bounded; toggling screening agrees on 3 systems".into())
}

fn criterion_6() -> Outcome {
    let grid = [0.0, 0.25, 0.5, 1.0, 2.0, 3.0, 4.0];
    for name in ["one_bus", "three_bus", "six_bus"] {
        let (system, base) = bundled(name);
        let mut last = f64::NEG_INFINITY;
        for gamma in grid {
            let set = DynamicUncertaintySet {
                gamma,
                ..base.clone()
            };
            let z = match solve_robust_uc(&system, &set, &default_opts()) {
                Ok(s) => s.objective,
                Err(Error::Infeasible(_)) => f64::INFINITY,
                Err(e) => return Err(format!("{name} Γ={gamma}: {e}")),
            };
            ensure!(
                z >= last - GAP * last.abs(),
                "{name}: z(Γ={gamma}) = {z} < {last}"
            );
            last = z;
        }
    }
    Ok(format!("Γ grid {grid:?} on 3 systems"))
}

fn criterion_7() -> Outcome {
    let shapes = [
        (1, 1, 3),
        (2, 2, 2),
        (3, 1, 3),
        (2, 1, 2),
        (4, 4, 1),
        (3, 2, 2),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut checked = 0;
    for norm in [NormKind::Linf, NormKind::L1, NormKind::L1Linf] {
        for &(n, nv, horizon) in &shapes {
            if norm == NormKind::L1Linf && nv * horizon == 4 && nv > 2 {
                continue;
            }
            let set = random_set(&mut rng, n, nv, horizon, norm);
            let vertices = enumerate_vertices(&v_space_halfspaces(&set), nv * horizon);
            ensure!(!vertices.is_empty(), "{norm:?} {n}×{nv}×{horizon}: empty");
            let oracle = SetOracle::new(&set).map_err(|e| e.to_string())?;
            for _ in 0..200 {
                let w = random_weights(&mut rng, n, horizon);
                let brute = vertex_max(&set, &vertices, &w);
                let lp = oracle.maximize(&w).map_err(|e| e.to_string())?.value;
                ensure!(
                    rel_close(lp, brute, 1e-6),
                    "{norm:?} {n}×{nv}×{horizon}: {lp} vs {brute}"
                );
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} weight vectors across 3 norms"))
}

fn criterion_8() -> Outcome {
    let a = [[0.5, 0.1, 0.0], [-0.2, 0.3, 0.1], [0.0, 0.2, 0.6]];
    let chol = [[1.0, 0.0, 0.0], [0.4, 0.8, 0.0], [-0.3, 0.2, 0.7]];
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut u = vec![vec![0.0; 3]];
    for _ in 1..10_000 {
        let prev = u.last().unwrap().clone();
        let e: Vec<f64> = (0..3).map(|_| StandardNormal.sample(&mut rng)).collect();
        u.push(
            (0..3)
                .map(|r| (0..3).map(|c| a[r][c] * prev[c] + chol[r][c] * e[c]).sum())
                .collect(),
        );
    }
    let fit = fit_var(&u, 1).map_err(|e| e.to_string())?;
    let mut worst_a = 0.0_f64;
    for r in 0..3 {
        for c in 0..3 {
            worst_a = worst_a.max((fit.lags[0][r][c] - a[r][c]).abs());
        }
    }
    ensure!(worst_a <= 0.05, "A error {worst_a}");
    let b = cholesky_psd(&fit.sigma).map_err(|e| e.to_string())?;
    let mut frob = 0.0;
    for r in 0..3 {
        for c in 0..3 {
            let bb: f64 = (0..3).map(|k| b[r][k] * b[c][k]).sum();
            frob += (bb - fit.sigma[r][c]).powi(2);
        }
    }
    let frob = f64::sqrt(frob);
    ensure!(frob <= 1e-8, "‖B Bᵀ − Σ̂‖_F = {frob}");
    let shares: Vec<f64> = (1..=3)
        .map(|nv| reduce_dimension(&fit.sigma, nv).unwrap().1)
        .collect();
    ensure!(
        shares.windows(2).all(|w| w[1] >= w[0]),
        "captured variance {shares:?}"
    );
    Ok(format!(
        "max |ΔA| {worst_a:.4}, ‖BBᵀ−Σ̂‖_F {frob:.1e}, captured {shares:.4?}"
    ))
}

fn criterion_9() -> Outcome {
    let v: Vec<f64> = (1..=100).map(f64::from).collect();
    ensure!(cvar(&v, 0.1) == 95.5, "CVaR {}", cvar(&v, 0.1));
    let (system, set) = bundled("six_bus");
    let sol = solve_robust_uc(&system, &set, &default_opts()).map_err(|e| e.to_string())?;
    let model = StochasticModel::from_set(&set, set.b.clone());
    let config = SimulationConfig {
        trajectories: 20,
        seed: 9,
        ..SimulationConfig::default()
    };
    let mut worst_gap = 0.0_f64;
    for k in 0..20u64 {
        let path = model.simulate_one(config.seed, k);
        let other = model.simulate_one(config.seed + 1, k);
        let t = (3 * k as usize + 1) % (system.horizon - 1);
        let gap =
            nonanticipativity_gap(&system, &sol, Some(&set), &model, &path, &other, t, &config)
                .map_err(|e| e.to_string())?;
        worst_gap = worst_gap.max(gap);
    }
    ensure!(worst_gap <= 1e-9, "non-anticipativity gap {worst_gap}");
    let (report, logs) =
        run_simulation(&system, &sol, Some(&set), &model, &config).map_err(|e| e.to_string())?;
    let csv_text = logs_to_csv(&system, &logs);
    let err = recompute_error(&report, &csv_text);
    ensure!(err <= 1e-9, "log recomputation error {err}");
    Ok(format!(
        "20 audited trajectories, recomputation error {err:.1e}, CVaR(1..100) = 95.5"
    ))
}

/// Largest relative mismatch between a report and metrics rebuilt from its CSV log.
fn recompute_error(report: &SimulationReport, csv_text: &str) -> f64 {
    let mut reader = csv::Reader::from_reader(csv_text.as_bytes());
    let headers = reader.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let (traj, commit, energy, pmw, pcost) = (
        col("trajectory"),
        col("commitment_cost"),
        col("energy_cost"),
        col("penalty_mw"),
        col("penalty_cost"),
    );
    let mut totals: Vec<f64> = Vec::new();
    let mut last = usize::MAX;
    let (mut pairs, mut hits) = (0.0, 0.0);
    for rec in reader.records() {
        let rec = rec.unwrap();
        let x = |i: usize| -> f64 { rec[i].parse().unwrap() };
        let k: usize = rec[traj].parse().unwrap();
        if k != last {
            totals.push(x(commit));
            last = k;
        }
        *totals.last_mut().unwrap() += x(energy) + x(pcost);
        pairs += 1.0;
        if x(pmw) > 1e-6 {
            hits += 1.0;
        }
    }
    let n = totals.len() as f64;
    let mean = totals.iter().sum::<f64>() / n;
    let std = (totals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let mut sorted = totals.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let k = (0.1 * n).ceil() as usize;
    let tail = sorted[..k].iter().sum::<f64>() / k as f64;
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1.0);
    [
        rel(report.cost_avg, mean),
        rel(report.cost_std, std),
        rel(report.cost_cvar, tail),
        rel(report.penalty_freq, hits / pairs),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

fn criterion_10(log: &mut String) -> Outcome {
    let (system, base) = bundled("six_bus");
    let model = StochasticModel::from_set(&base, base.b.clone());
    let sim = |sol: &UcSolution, set: Option<&DynamicUncertaintySet>, engine: EdKind| {
        let config = SimulationConfig {
            trajectories: 100,
            seed: 10,
            engine,
            ..SimulationConfig::default()
        };
        run_simulation(&system, sol, set, &model, &config).map(|(r, _)| r)
    };
    let set = DynamicUncertaintySet {
        gamma: 2.0,
        ..base.clone()
    };
    let robust = solve_robust_uc(&system, &set, &default_opts()).map_err(|e| e.to_string())?;
    let rob = sim(&robust, Some(&set), EdKind::PolicyGuided).map_err(|e| e.to_string())?;
    let _ = writeln!(
        log,
        "end_to_end method=robuc-dynamic gamma=2 penalty_freq={} cost_avg={} cost_cvar={}",
        rob.penalty_freq, rob.cost_avg, rob.cost_cvar
    );
    let samples = simulate_paths(&model, 200, 1010).map_err(|e| e.to_string())?;
    let forecast = base.forecast_path().available;
    let mut best: Option<(f64, SimulationReport)> = None;
    for reserve_gamma in [0.5, 1.0, 2.0, 3.0] {
        let reserves = reserve_rule(&system, &samples, reserve_gamma).map_err(|e| e.to_string())?;
        let det =
            match solve_deterministic_uc(&system, &forecast, &reserves, &DetUcOptions::default()) {
                Ok(s) => s,
                Err(Error::Infeasible(_)) => continue,
                Err(e) => return Err(e.to_string()),
            };
        let rep = sim(&det, None, EdKind::Deterministic).map_err(|e| e.to_string())?;
        let _ = writeln!(
            log,
            "end_to_end method=det-uc reserve_gamma={reserve_gamma} penalty_freq={} cost_avg={} cost_cvar={}",
            rep.penalty_freq, rep.cost_avg, rep.cost_cvar
        );
        if best
            .as_ref()
            .map_or(true, |(_, b)| rep.penalty_freq < b.penalty_freq)
        {
            best = Some((reserve_gamma, rep));
        }
    }
    let (rg, det) = best.ok_or("no reserve setting admitted a deterministic schedule")?;
    ensure!(
        rob.completed == 100 && det.completed == 100,
        "incomplete runs"
    );
    ensure!(
        rob.penalty_freq <= det.penalty_freq + 0.05,
        "RobUC {:.2}% vs DetUC {:.2}%",
        100.0 * rob.penalty_freq,
        100.0 * det.penalty_freq
    );
    let direction = if rob.penalty_freq <= det.penalty_freq {
        "≤"
    } else {
        ">"
    };
    Ok(format!(
        "penalty freq RobUC-Dynamic(Γ=2) {:.2}% {direction} DetUC(best reserve Γ={rg}) {:.2}%",
        100.0 * rob.penalty_freq,
        100.0 * det.penalty_freq
    ))
}

fn criterion_11(suite_start: Instant) -> Outcome {
    let (system, set) = bundled("six_bus");
    let started = Instant::now();
    let sol = solve_robust_uc(&system, &set, &default_opts()).map_err(|e| e.to_string())?;
    let solve = started.elapsed().as_secs_f64();
    ensure!(sol.certified, "6-bus solve not certified");
    ensure!(solve < 60.0, "6-bus solve took {solve:.1} s");
    let suite = suite_start.elapsed().as_secs_f64();
    ensure!(suite < 1800.0, "suite took {suite:.0} s");
    Ok(format!(
        "6-bus solve {solve:.2} s, suite so far {suite:.1} s"
    ))
}

fn report(results: &mut Vec<bool>, label: &str, f: impl FnOnce() -> Outcome) {
    let started = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| (*s).to_string()))
            .unwrap_or_else(|| "panic".into()))
    });
    let secs = started.elapsed().as_secs_f64();
    match &outcome {
        Ok(detail) => println!("PASS {label} ({secs:.1} s): {detail}"),
        Err(detail) => println!("FAIL {label} ({secs:.1} s): {detail}"),
    }
    results.push(outcome.is_ok());
}

fn main() {
    if std::env::args().any(|a| a == "--list") {
        // Listing for tooling that enumerates test binaries.
        println!("acceptance: test");
        return;
    }
    let suite_start = Instant::now();
    let mut results = Vec::new();
    let mut log = String::new();

    let mut instances = Vec::new();
    report(&mut results, "1 affine rows equivalence", || {
        criterion_1(&mut instances)
    });
    report(&mut results, "2 energy balance over members", || {
        criterion_2(&instances)
    });
    report(&mut results, "3 outer approximation soundness", || {
        criterion_3(&mut log)
    });
    report(&mut results, "4 generation vs monolithic dual", criterion_4);
    report(&mut results, "5 screening soundness", criterion_5);
    report(&mut results, "6 cost monotone in Γ", criterion_6);
    report(
        &mut results,
        "7 set oracle vs vertex enumeration",
        criterion_7,
    );
    report(&mut results, "8 estimation round trip", criterion_8);
    report(&mut results, "9 simulation protocol", criterion_9);
    report(&mut results, "10 end-to-end penalty frequency", || {
        criterion_10(&mut log)
    });
    report(&mut results, "11 performance", || criterion_11(suite_start));

    let artifact = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance_report.txt");
    if std::fs::write(&artifact, &log).is_ok() {
        println!("report written to {}", artifact.display());
    }
    let passed = results.iter().filter(|&&ok| ok).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
