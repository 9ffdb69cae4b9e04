use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::Context;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use ruc_core::dispatch::{reserve_rule, solve_deterministic_uc, EdKind};
use ruc_core::model::{load_system, PowerSystem};
use ruc_core::robust::{solve_robust_uc, UcSolution};
use ruc_core::simulation::{logs_to_csv, run_simulation, SimulationConfig, SimulationReport};
use ruc_core::uncertainty::{
    estimate, load_model, load_set, load_time_series, save_model, save_set, simulate_paths,
    DynamicUncertaintySet, EstimateOptions, StochasticModel,
};
use ruc_core::Error;

use crate::config::{require, RunConfig};

/// A solve stopped at its iteration or time limit; the incumbent was still written.
#[derive(Debug, thiserror::Error)]
#[error("limit reached: {0}")]
pub struct LimitReached(pub String);

/// Seeds derived from the run seed, in draw order. Kept to 63 bits so TOML can hold them.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Seeds {
    pub simulation: u64,
    pub reserves: u64,
}

impl Seeds {
    pub fn from_run(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            simulation: rng.next_u64() >> 1,
            reserves: rng.next_u64() >> 1,
        }
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    core_version: &'a str,
    backends: Vec<&'static str>,
    config_sha256: String,
    seed: u64,
    seeds: Seeds,
    inputs: Vec<(String, String)>,
    outputs: Vec<String>,
    config: &'a RunConfig,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

struct Run<'a> {
    command: &'a str,
    config: &'a RunConfig,
    out: PathBuf,
    seeds: Seeds,
    outputs: Vec<String>,
}

impl<'a> Run<'a> {
    fn new(command: &'a str, config: &'a RunConfig) -> anyhow::Result<Self> {
        let out = config
            .paths
            .output_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("."));
        std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
        Ok(Self {
            command,
            config,
            out,
            seeds: Seeds::from_run(config.seed),
            outputs: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> anyhow::Result<()> {
        let path = self.out.join(name);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    fn finish(mut self) -> anyhow::Result<()> {
        let p = &self.config.paths;
        let inputs = [&p.system, &p.series, &p.set, &p.model, &p.solution]
            .into_iter()
            .flatten()
            .map(|path| {
                let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
                Ok((path.display().to_string(), sha256_hex(&bytes)))
            })
            .collect::<anyhow::Result<Vec<_>>>()?;
        let mut backends = vec!["builtin"];
        if cfg!(feature = "highs") {
            backends.push("highs");
        }
        let outputs = std::mem::take(&mut self.outputs);
        let manifest = Manifest {
            command: self.command,
            version: env!("CARGO_PKG_VERSION"),
            core_version: ruc_core::VERSION,
            backends,
            config_sha256: sha256_hex(self.config.to_toml().as_bytes()),
            seed: self.config.seed,
            seeds: self.seeds,
            inputs,
            outputs,
            config: self.config,
        };
        let text = toml::to_string(&manifest).context("serializing manifest")?;
        self.write("manifest.toml", &text)
    }
}

pub fn run(command: &str, config: &RunConfig) -> anyhow::Result<()> {
    let mut run = Run::new(command, config)?;
    let outcome = match command {
        "estimate" => cmd_estimate(&mut run),
        "solve-uc" => cmd_solve_uc(&mut run),
        "solve-det-uc" => cmd_solve_det_uc(&mut run),
        "simulate" => cmd_simulate(&mut run),
        "compare" => cmd_compare(&mut run),
        other => anyhow::bail!("unknown command {other}"),
    };
    // The manifest is written for limit-stopped runs too, since their outputs exist.
    match outcome {
        Ok(()) => run.finish(),
        Err(e) if e.downcast_ref::<LimitReached>().is_some() => {
            run.finish()?;
            Err(e)
        }
        Err(e) => Err(e),
    }
}

fn system(config: &RunConfig) -> anyhow::Result<PowerSystem> {
    Ok(load_system(require(&config.paths.system, "system")?)?)
}

/// The set file with Γ and ρ overrides applied.
pub fn uncertainty_set(config: &RunConfig) -> anyhow::Result<DynamicUncertaintySet> {
    let mut set = load_set(require(&config.paths.set, "set")?)?;
    if let Some(g) = config.set.gamma {
        set.gamma = g;
    }
    if let Some(r) = config.set.rho {
        set.rho = r;
    }
    set.validate()?;
    Ok(set)
}

/// The model file, or the set's recursion driven by its own B.
pub fn stochastic_model(
    config: &RunConfig,
    set: &DynamicUncertaintySet,
) -> anyhow::Result<StochasticModel> {
    let model = match &config.paths.model {
        Some(p) => load_model(p)?,
        None => {
            log::info!("no model file given; simulating with the set's own recursion");
            StochasticModel::from_set(set, set.b.clone())
        }
    };
    model.validate()?;
    Ok(model)
}

fn check_fit(system: &PowerSystem, set: &DynamicUncertaintySet) -> anyhow::Result<()> {
    if set.num_units() != system.renewables.len() || set.horizon() != system.horizon {
        return Err(Error::Invalid(format!(
            "set is {} units × {} periods but the system has {} renewables over {} periods",
            set.num_units(),
            set.horizon(),
            system.renewables.len(),
            system.horizon
        ))
        .into());
    }
    Ok(())
}

fn cmd_estimate(run: &mut Run) -> anyhow::Result<()> {
    let config = run.config;
    let system = system(config)?;
    let series = load_time_series(require(&config.paths.series, "series")?)?;
    let rows = system
        .renewables
        .iter()
        .map(|r| {
            series
                .units
                .iter()
                .position(|u| *u == r.id)
                .map(|k| series.values[k].clone())
                .ok_or_else(|| {
                    Error::Invalid(format!("series has no column for renewable {}", r.id))
                })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let e = &config.estimate;
    let options = EstimateOptions {
        cycle: e.cycle,
        lag: e.lag,
        nv: e.nv.unwrap_or(rows.len()),
    };
    let est = estimate(&rows, options)?;
    let p_max = system.renewable_bounds();
    let set = est.to_set(p_max.clone(), e.start, e.gamma, e.rho, e.norm);
    set.validate()?;
    let model = StochasticModel::from_estimate(&est, p_max, e.start);
    let set_path = run.out.join("set.toml");
    save_set(&set, &set_path)?;
    run.outputs.push("set.toml".into());
    let model_path = run.out.join("model.toml");
    save_model(&model, &model_path)?;
    run.outputs.push("model.toml".into());

    println!(
        "units: {}",
        system
            .renewables
            .iter()
            .map(|r| r.id.as_str())
            .collect::<Vec<_>>()
            .join(", ")
    );
    println!("observations: {}", rows.first().map_or(0, Vec::len));
    println!("lag order: {}, N_v: {}", e.lag, est.nv);
    println!("captured variance: {:.6}", est.captured_variance);
    for k in 1..=est.eigen.values.len() {
        println!("  N_v = {k}: {:.6}", est.captured_by(k));
    }
    let max_ev = est.eigen.values.first().copied().unwrap_or(0.0);
    let min_ev = est.eigen.values.last().copied().unwrap_or(0.0);
    if min_ev > 0.0 {
        println!(
            "innovation covariance condition number: {:.3e}",
            max_ev / min_ev
        );
    } else {
        println!("innovation covariance is singular");
    }
    if est.regularized {
        println!("note: the lag regression was regularized");
    }
    Ok(())
}

fn print_solution(label: &str, sol: &UcSolution) {
    println!("{label}");
    println!("  objective:        {:.4}", sol.objective);
    println!("  commitment cost:  {:.4}", sol.commitment_cost);
    println!("  worst-case cost:  {:.4}", sol.worst_case_cost);
    println!("  certified:        {}", sol.certified);
    let s = &sol.stats;
    println!(
        "  iterations {}  master solves {}  LPs {} (screened {})  cuts {}  wall {:.2}s",
        s.iterations, s.master_solves, s.lps_solved, s.lps_screened, s.cuts_added, s.wall_time
    );
}

fn limit_check(sol: &UcSolution, what: &str) -> anyhow::Result<()> {
    if sol.certified {
        Ok(())
    } else {
        Err(LimitReached(format!("{what} returned an uncertified incumbent")).into())
    }
}

fn cmd_solve_uc(run: &mut Run) -> anyhow::Result<()> {
    let config = run.config;
    let system = system(config)?;
    let set = uncertainty_set(config)?;
    check_fit(&system, &set)?;
    let sol = solve_robust_uc(&system, &set, &config.robust)?;
    run.write("solution.toml", &sol.to_toml()?)?;
    print_solution("robust UC", &sol);
    limit_check(&sol, "robust UC")
}

/// Deterministic UC on the set's forecast, reserves sized from sampled trajectories.
pub fn det_uc(
    system: &PowerSystem,
    set: &DynamicUncertaintySet,
    model: &StochasticModel,
    config: &RunConfig,
    reserve_gamma: f64,
    seeds: Seeds,
) -> anyhow::Result<UcSolution> {
    let samples = simulate_paths(model, config.det_uc.reserve_samples, seeds.reserves)?;
    let reserves = reserve_rule(system, &samples, reserve_gamma)?;
    let forecast = set.forecast_path().available;
    Ok(solve_deterministic_uc(
        system,
        &forecast,
        &reserves,
        &config.det_uc.options,
    )?)
}

fn cmd_solve_det_uc(run: &mut Run) -> anyhow::Result<()> {
    let config = run.config;
    let system = system(config)?;
    let set = uncertainty_set(config)?;
    check_fit(&system, &set)?;
    let model = stochastic_model(config, &set)?;
    let sol = det_uc(
        &system,
        &set,
        &model,
        config,
        config.det_uc.reserve_gamma,
        run.seeds,
    )?;
    run.write("solution.toml", &sol.to_toml()?)?;
    print_solution("deterministic UC", &sol);
    limit_check(&sol, "deterministic UC")
}

pub fn simulate(
    system: &PowerSystem,
    sol: &UcSolution,
    set: &DynamicUncertaintySet,
    model: &StochasticModel,
    config: &RunConfig,
    engine: EdKind,
    seeds: Seeds,
) -> anyhow::Result<(SimulationReport, String)> {
    let sim = SimulationConfig {
        seed: seeds.simulation,
        engine,
        ..config.simulation.clone()
    };
    let set = (engine != EdKind::Deterministic).then_some(set);
    let (report, logs) = run_simulation(system, sol, set, model, &sim)?;
    if report.partial {
        log::warn!(
            "{} of {} trajectories failed",
            report.trajectories - report.completed,
            report.trajectories
        );
    }
    Ok((report, logs_to_csv(system, &logs)))
}

fn print_report(report: &SimulationReport) {
    for (name, value) in report.table_rows() {
        println!("{name:<22}{value:>16}");
    }
    if report.partial {
        println!(
            "({} of {} trajectories completed)",
            report.completed, report.trajectories
        );
    }
}

fn cmd_simulate(run: &mut Run) -> anyhow::Result<()> {
    let config = run.config;
    let system = system(config)?;
    let set = uncertainty_set(config)?;
    check_fit(&system, &set)?;
    let model = stochastic_model(config, &set)?;
    let path = require(&config.paths.solution, "solution")?;
    let sol =
        UcSolution::from_toml(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)?;
    let (report, csv) = simulate(
        &system,
        &sol,
        &set,
        &model,
        config,
        config.simulation.engine,
        run.seeds,
    )?;
    run.write("report.toml", &report.to_toml()?)?;
    run.write("logs.csv", &csv)?;
    print_report(&report);
    Ok(())
}

#[derive(Serialize)]
pub struct CompareCell {
    pub method: String,
    pub gamma: f64,
    pub objective: f64,
    pub certified: bool,
    pub report: SimulationReport,
}

#[derive(Serialize)]
struct CompareFile<'a> {
    cells: &'a [CompareCell],
}

pub const METHODS: [(&str, EdKind); 3] = [
    ("RobUC-Dynamic", EdKind::PolicyGuided),
    ("RobUC-Static", EdKind::PolicyEnforcement),
    ("DetUC", EdKind::Deterministic),
];

fn cmd_compare(run: &mut Run) -> anyhow::Result<()> {
    let config = run.config;
    let system = system(config)?;
    let base = uncertainty_set(config)?;
    check_fit(&system, &base)?;
    let model = stochastic_model(config, &base)?;
    let mut cells = Vec::new();
    for &gamma in &config.compare.gammas {
        let dynamic = DynamicUncertaintySet {
            gamma,
            ..base.clone()
        };
        let fixed = dynamic.static_counterpart(&model.noise);
        for (method, engine) in METHODS {
            log::info!("{method} at Γ = {gamma}");
            let (set, sol) = match engine {
                EdKind::PolicyGuided => (
                    &dynamic,
                    solve_robust_uc(&system, &dynamic, &config.robust)?,
                ),
                EdKind::PolicyEnforcement => {
                    (&fixed, solve_robust_uc(&system, &fixed, &config.robust)?)
                }
                EdKind::Deterministic => (
                    &dynamic,
                    det_uc(&system, &dynamic, &model, config, gamma, run.seeds)?,
                ),
            };
            let (report, csv) = simulate(&system, &sol, set, &model, config, engine, run.seeds)?;
            let dir = format!("{method}/gamma_{gamma}");
            run.write(&format!("{dir}/solution.toml"), &sol.to_toml()?)?;
            run.write(&format!("{dir}/report.toml"), &report.to_toml()?)?;
            run.write(&format!("{dir}/logs.csv"), &csv)?;
            cells.push(CompareCell {
                method: method.to_string(),
                gamma,
                objective: sol.objective,
                certified: sol.certified,
                report,
            });
        }
    }
    let text = toml::to_string(&CompareFile { cells: &cells }).context("serializing comparison")?;
    run.write("compare.toml", &text)?;
    print!("{}", compare_table(&cells));
    Ok(())
}

/// One block per method, one column per Γ, one row per metric.
pub fn compare_table(cells: &[CompareCell]) -> String {
    let mut out = String::new();
    for (method, _) in METHODS {
        let row: Vec<&CompareCell> = cells.iter().filter(|c| c.method == method).collect();
        if row.is_empty() {
            continue;
        }
        let _ = write!(out, "\n{method}\n{:<22}", "Γ");
        for c in &row {
            let _ = write!(out, "{:>14}", c.gamma);
        }
        out.push('\n');
        let tables: Vec<_> = row.iter().map(|c| c.report.table_rows()).collect();
        for (k, (name, _)) in tables[0].iter().enumerate() {
            let _ = write!(out, "{name:<22}");
            for t in &tables {
                let _ = write!(out, "{:>14}", t[k].1);
            }
            out.push('\n');
        }
    }
    out
}
