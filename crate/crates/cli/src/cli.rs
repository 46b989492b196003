//! Command-line surface: subcommands, `--config` files and per-key overrides.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use crate::config::{self, ConfigError, Entry, Origin, RunConfig};
use crate::run::{run, Experiment};

#[derive(Debug, Parser)]
#[command(
    name = "dyadic",
    version,
    about = "Dyadic shell models for the Euler and ideal MHD equations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate a model and write trajectory.csv, diagnostics.csv and summary.json.
    Simulate(RunArgs),
    /// Solve for a steady state and write steady.json.
    Steady(RunArgs),
    /// Scan a linearized eigenproblem and write scan.csv and linstab.json.
    Linstab(RunArgs),
    /// Run to the norm threshold with the Lyapunov certificate enabled.
    Blowup(RunArgs),
}

impl Command {
    pub fn split(&self) -> (Experiment, &RunArgs) {
        match self {
            Command::Simulate(a) => (Experiment::Simulate, a),
            Command::Steady(a) => (Experiment::Steady, a),
            Command::Linstab(a) => (Experiment::Linstab, a),
            Command::Blowup(a) => (Experiment::Blowup, a),
        }
    }
}

macro_rules! overrides {
    ($($key:ident),* $(,)?) => {
        /// One optional flag per configuration key; flags win over the file.
        #[derive(Debug, Default, Clone, clap::Args)]
        pub struct Overrides {
            $(
                #[arg(long = stringify!($key), value_name = "VALUE", allow_hyphen_values = true)]
                pub $key: Option<String>,
            )*
        }

        impl Overrides {
            pub fn entries(&self) -> Vec<Entry> {
                let mut out = Vec::new();
                $(
                    if let Some(value) = &self.$key {
                        out.push(Entry { origin: Origin::Flag, key: stringify!($key).into(), value: value.clone() });
                    }
                )*
                out
            }
        }
    };
}

overrides!(
    model,
    lambda,
    theta,
    delta,
    shells,
    f0,
    initial,
    t_end,
    method,
    tol,
    abs_tol,
    rel_tol,
    dt,
    dt_max,
    sample_every,
    diagnostics,
    lyapunov,
    events,
    output_dir,
    seed,
    channel,
    scan,
    depth,
    a0_sign,
    closure,
    newton_tol,
    max_iter,
);

#[derive(Debug, Clone, clap::Args)]
pub struct RunArgs {
    /// Configuration file (key=value or JSON); repeat to run several in parallel.
    #[arg(long, value_name = "PATH")]
    pub config: Vec<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

/// A configuration that failed to load, with the file it came from.
#[derive(Debug, thiserror::Error)]
#[error("{source_name}:\n{error}")]
pub struct LoadError {
    pub source_name: String,
    pub error: ConfigError,
}

/// Resolved runs: configuration and output directory.
pub fn load(args: &RunArgs) -> Result<Vec<(RunConfig, PathBuf)>> {
    let overrides = args.overrides.entries();
    if args.config.is_empty() {
        let cfg = config::build(&[], &overrides).map_err(|error| LoadError {
            source_name: "flags".into(),
            error,
        })?;
        let out = cfg.output_dir.clone();
        return Ok(vec![(cfg, out)]);
    }
    let several = args.config.len() > 1;
    let mut runs = Vec::new();
    for path in &args.config {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg = config::entries(&text)
            .and_then(|base| config::build(&base, &overrides))
            .map_err(|error| LoadError {
                source_name: path.display().to_string(),
                error,
            })?;
        let out = if several {
            cfg.output_dir.join(run_name(path))
        } else {
            cfg.output_dir.clone()
        };
        runs.push((cfg, out));
    }
    let mut dirs: Vec<&PathBuf> = runs.iter().map(|(_, d)| d).collect();
    dirs.sort();
    if let Some(w) = dirs.windows(2).find(|w| w[0] == w[1]) {
        anyhow::bail!("two configurations write to {}", w[0].display());
    }
    Ok(runs)
}

fn run_name(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "run".into(), |s| s.to_string_lossy().into_owned())
}

/// Runs every configuration on a pool of worker threads. Returns the
/// failures as `(output_dir, error)`.
pub fn execute(
    experiment: Experiment,
    runs: &[(RunConfig, PathBuf)],
) -> Vec<(PathBuf, anyhow::Error)> {
    let workers = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(runs.len())
        .max(1);
    let next = AtomicUsize::new(0);
    let failures = Mutex::new(Vec::new());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some((cfg, out)) = runs.get(i) else { break };
                if let Err(e) = run(experiment, cfg, out) {
                    failures
                        .lock()
                        .expect("no worker panics while holding the lock")
                        .push((out.clone(), e));
                }
            });
        }
    });
    let mut failures = failures.into_inner().expect("workers have finished");
    failures.sort_by(|a, b| a.0.cmp(&b.0));
    failures
}
