mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use ruc_core::backend::{BackendError, BackendKind};
use ruc_core::dispatch::EdKind;
use ruc_core::Error;

#[derive(Parser, Debug)]
#[command(
    name = "ruc",
    version,
    about = "Adaptive robust unit commitment with dynamic uncertainty sets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Fit a dynamic uncertainty set and a stochastic model to an availability history.
    Estimate,
    /// Solve the adaptive robust UC.
    SolveUc,
    /// Solve the deterministic UC with sampled reserve requirements.
    SolveDetUc,
    /// Operate a day-ahead solution on simulated trajectories.
    Simulate,
    /// Run RobUC-Dynamic, RobUC-Static and DetUC over a Γ grid and tabulate.
    Compare,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Estimate => "estimate",
            Command::SolveUc => "solve-uc",
            Command::SolveDetUc => "solve-det-uc",
            Command::Simulate => "simulate",
            Command::Compare => "compare",
        }
    }
}

#[derive(Args, Debug)]
struct Common {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    system: Option<PathBuf>,
    #[arg(long, global = true)]
    series: Option<PathBuf>,
    #[arg(long, global = true)]
    set: Option<PathBuf>,
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    #[arg(long, global = true)]
    solution: Option<PathBuf>,
    #[arg(long = "out", global = true)]
    output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Cap on worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    gamma: Option<f64>,
    #[arg(long, global = true)]
    rho: Option<f64>,
    #[arg(long, global = true)]
    backend: Option<BackendKind>,
    #[arg(long, global = true)]
    gap: Option<f64>,
    #[arg(long, global = true)]
    time_limit: Option<f64>,
    #[arg(long, global = true)]
    eps_viol: Option<f64>,
    #[arg(long, global = true)]
    eps_loose: Option<f64>,
    #[arg(long, global = true)]
    no_screening: bool,
    /// Handle inter-temporal rows by column generation instead of the outer approximation.
    #[arg(long, global = true)]
    no_oa: bool,
    #[arg(long, global = true)]
    one_tree: bool,
    #[arg(long, global = true)]
    monolithic: bool,
    #[arg(long, global = true)]
    nv: Option<usize>,
    #[arg(long, global = true)]
    lag: Option<usize>,
    #[arg(long, global = true)]
    trajectories: Option<usize>,
    #[arg(long, global = true)]
    engine: Option<EdKind>,
    #[arg(long, global = true)]
    lookahead: Option<usize>,
    #[arg(long, global = true)]
    reserve_gamma: Option<f64>,
    /// Comma-separated Γ grid for `compare`.
    #[arg(long, global = true, value_delimiter = ',')]
    gammas: Option<Vec<f64>>,
    #[arg(short, long, global = true)]
    verbose: bool,
}

impl Common {
    fn merge(&self) -> anyhow::Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let paths = &mut c.paths;
        for (slot, flag) in [
            (&mut paths.system, &self.system),
            (&mut paths.series, &self.series),
            (&mut paths.set, &self.set),
            (&mut paths.model, &self.model),
            (&mut paths.solution, &self.solution),
            (&mut paths.output_dir, &self.output_dir),
        ] {
            if flag.is_some() {
                slot.clone_from(flag);
            }
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(t) = self.threads {
            c.threads = t;
        }
        if self.gamma.is_some() {
            c.set.gamma = self.gamma;
            c.estimate.gamma = self.gamma.unwrap_or(c.estimate.gamma);
        }
        if self.rho.is_some() {
            c.set.rho = self.rho;
            c.estimate.rho = self.rho.unwrap_or(c.estimate.rho);
        }
        if let Some(b) = self.backend {
            c.robust.backend = b;
            c.det_uc.options.backend = b;
            c.simulation.ed.backend = b;
        }
        if let Some(g) = self.gap {
            c.robust.mip_gap = g;
            c.det_uc.options.mip_gap = g;
        }
        if self.time_limit.is_some() {
            c.robust.time_limit = self.time_limit;
            c.det_uc.options.time_limit = self.time_limit;
        }
        if let Some(e) = self.eps_viol {
            c.robust.eps_viol = e;
        }
        if let Some(e) = self.eps_loose {
            c.robust.eps_loose_factor = e;
        }
        c.robust.screening &= !self.no_screening;
        c.robust.outer_approximation &= !self.no_oa;
        c.robust.one_tree |= self.one_tree;
        c.robust.monolithic |= self.monolithic;
        if self.nv.is_some() {
            c.estimate.nv = self.nv;
        }
        if let Some(l) = self.lag {
            c.estimate.lag = l;
        }
        if let Some(n) = self.trajectories {
            c.simulation.trajectories = n;
        }
        if let Some(e) = self.engine {
            c.simulation.engine = e;
        }
        if let Some(l) = self.lookahead {
            c.simulation.ed.lookahead = l;
        }
        if let Some(r) = self.reserve_gamma {
            c.det_uc.reserve_gamma = r;
        }
        if let Some(g) = &self.gammas {
            c.compare.gammas.clone_from(g);
        }
        if c.threads > 0 {
            c.robust.threads = c.threads;
            c.det_uc.options.threads = c.threads;
        }
        c.validate()?;
        Ok(c)
    }
}

/// Process exit status for a failed run.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Parse(_) | Error::Invalid(_) | Error::Io { .. }) => 2,
        Some(Error::Infeasible(_)) => 3,
        Some(Error::Backend(BackendError::NotAvailable(_))) => 4,
        Some(Error::Limit(_)) => 5,
        Some(Error::Simulation(_)) => 6,
        Some(Error::Estimation(_)) => 7,
        Some(_) => 1,
        // Config, flag and file errors raised by the driver itself.
        None if err.downcast_ref::<commands::LimitReached>().is_some() => 5,
        None => 2,
    }
}

/// The error chain joined by ": ", skipping causes already quoted by their parent.
fn describe(err: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if !out.ends_with(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.common.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = cli.common.merge().and_then(|config| {
        if config.threads > 0 {
            // Ignored when a pool already exists.
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(config.threads)
                .build_global();
        }
        commands::run(cli.command.name(), &config)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", describe(&err));
            ExitCode::from(exit_code(&err))
        }
    }
}
