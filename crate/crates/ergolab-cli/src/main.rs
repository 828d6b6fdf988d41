mod compare;
mod config;
mod runner;

use clap::{Parser, Subcommand};
use config::ExperimentConfig;
use std::path::PathBuf;
use std::process::ExitCode;

/// Ensemble runner for SDE growth-envelope, ergodic-average, and scaled-sum
/// experiments with bitwise-reproducible output.
#[derive(Parser)]
#[command(name = "ergolab", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Execute an experiment config and write CSV reports plus a manifest.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; defaults to the rayon global default. Never
        /// affects output bytes.
        #[arg(long)]
        workers: Option<usize>,
        /// Overrides the config's master seed.
        #[arg(long)]
        master_seed: Option<u64>,
    },
    /// Score a finished run against the quadrature oracle.
    Compare {
        /// Directory produced by `run`.
        #[arg(long)]
        run: PathBuf,
        /// Optional config whose model must match the run's.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Parse and fully validate a config, echoing the resolved form.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn load_config(path: &PathBuf, master_seed: Option<u64>) -> anyhow::Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| anyhow::anyhow!("reading {}: {e}", path.display()))?;
    let mut cfg = config::parse_config(&text)?;
    if let Some(seed) = master_seed {
        match &mut cfg {
            ExperimentConfig::Sde(s) => s.ensemble.master_seed = seed,
            ExperimentConfig::Slln(s) => s.master_seed = seed,
        }
    }
    Ok(cfg)
}

fn dispatch(cli: Cli) -> anyhow::Result<i32> {
    match cli.cmd {
        Cmd::Run {
            config,
            out,
            workers,
            master_seed,
        } => {
            let cfg = load_config(&config, master_seed)?;
            match workers {
                Some(w) => rayon::ThreadPoolBuilder::new()
                    .num_threads(w)
                    .build()
                    .map_err(|e| anyhow::anyhow!("building worker pool: {e}"))?
                    .install(|| runner::execute(&cfg, &out)),
                None => runner::execute(&cfg, &out),
            }
        }
        Cmd::Compare { run, config } => {
            let override_text = match config {
                Some(p) => Some(std::fs::read_to_string(&p).map_err(|e| {
                    anyhow::anyhow!("reading {}: {e}", p.display())
                })?),
                None => None,
            };
            compare::compare(&run, override_text.as_deref())
        }
        Cmd::Validate { config } => {
            let cfg = load_config(&config, None)?;
            match &cfg {
                ExperimentConfig::Sde(s) => {
                    s.resolve()?;
                }
                ExperimentConfig::Slln(s) => s.validate()?,
            }
            println!(
                "{}",
                serde_json::to_string_pretty(&config::echo_config(&cfg)?)?
            );
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    // Die quietly when a downstream reader (e.g. `head`) closes stdout,
    // matching conventional pipeline behavior instead of panicking.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
