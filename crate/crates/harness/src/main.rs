use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use minimax_harness::{compare_solvers, format_table, run_experiment, ExperimentConfig, OUT_DIR_ENV};

#[derive(Parser)]
#[command(name = "minimax", version, about = "Seeded experiments for stochastic minimax solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Overrides {
    /// Comma-separated seed list, replacing run.seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Envelope evaluation interval in rounds (0 disables it).
    #[arg(long)]
    cadence: Option<usize>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write trajectories plus a summary.
    Run {
        config: PathBuf,
        /// Output directory; takes precedence over the environment and the config.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Compare rounds and samples to reach a stationarity level.
    Compare {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        #[arg(long)]
        eps: f64,
        #[command(flatten)]
        overrides: Overrides,
    },
}

fn load(path: &PathBuf, o: &Overrides) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
    if let Some(seeds) = &o.seeds {
        cfg.run.seeds = seeds.clone();
    }
    if let Some(c) = o.cadence {
        cfg.run.cadence = c;
    }
    if let Some(w) = o.workers {
        cfg.run.workers = w;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Run {
            config,
            out_dir,
            overrides,
        } => {
            let cfg = load(&config, &overrides)?;
            let out_dir = out_dir
                .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
                .unwrap_or_else(|| cfg.run.out_dir.clone());
            let out = run_experiment(&cfg, &out_dir, cfg.run.workers)?;
            println!("{}", out.summary.display());
        }
        Command::Compare {
            configs,
            eps,
            overrides,
        } => {
            let cfgs = configs.iter().map(|p| load(p, &overrides)).collect::<Result<Vec<_>>>()?;
            let workers = cfgs[0].run.workers;
            let rows = compare_solvers(&cfgs, eps, workers)?;
            print!("{}", format_table(&rows, eps));
        }
    }
    Ok(())
}
