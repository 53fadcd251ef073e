//! `mgeo`: analyze, backtest and frontier stages over a price panel.
//!
//! Every stage writes into a fresh run directory:
//!
//! ```text
//! <out>/config.json, inputs.json
//! <out>/analyze/spectrum.csv, eigen_coords.csv, dimension.json, surrogates/window_NNN.csv
//! <out>/backtest/scenarios.json, <label>/{track.csv, composition.csv, summary.json}
//! <out>/frontier/frontier.csv, placements.csv, frontier.json
//! ```

pub mod commands;
pub mod config;
pub mod error;

use std::path::PathBuf;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use market_geometry::report;
use market_geometry::synthetic::{synthetic_market, MarketSpec};

use crate::commands::*;
use crate::config::{Overrides, RunConfig};
pub use crate::error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(
    name = "mgeo",
    version,
    about = "Market geometry, subspace portfolios and frontiers"
)]
pub struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; must be new or empty. Defaults to mgeo-<timestamp>.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-window spectra, eigen-coordinates and surrogate dimension estimates.
    Analyze(RunArgs),
    /// Rolling subspace-portfolio backtests for every configured scenario.
    Backtest(RunArgs),
    /// Long-only efficient frontier and scenario placements.
    Frontier {
        #[command(flatten)]
        run: RunArgs,
        /// Previous run (or its backtest/ directory) to place on the plane.
        #[arg(long, conflicts_with = "compute_backtest")]
        backtest: Option<PathBuf>,
        /// Run the backtests in-process instead of reading them.
        #[arg(long)]
        compute_backtest: bool,
    },
    /// analyze + backtest + frontier in one run directory.
    Suite(RunArgs),
    /// Writes a seeded synthetic panel, index and config.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 30)]
    pub assets: usize,
    #[arg(long, default_value = "2000-01-03")]
    pub start: NaiveDate,
    #[arg(long, default_value = "2003-12-31")]
    pub end: NaiveDate,
    #[arg(long, default_value_t = 3)]
    pub factors: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn load_config(args: &RunArgs) -> Result<RunConfig> {
    RunConfig::load(
        &args.config,
        &Overrides {
            seed: args.seed,
            output: args.out.clone(),
        },
    )
}

/// Runs one command and returns the directory it wrote.
pub fn run(cli: Cli) -> Result<PathBuf> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        // Fails only if a pool already exists, which is harmless here.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    match cli.command {
        Command::Analyze(args) => {
            let config = load_config(&args)?;
            let inputs = load_inputs(&config, false)?;
            let windows = analyze(&config, &inputs, period_geometries(&inputs)?)?;
            let dir = prepare_output(config.output.as_deref())?;
            write_run_header(&dir, &config, &inputs)?;
            write_analysis(&dir.join("analyze"), &config, &inputs, &windows)?;
            Ok(dir)
        }
        Command::Backtest(args) => {
            let config = load_config(&args)?;
            let inputs = load_inputs(&config, true)?;
            let results = backtester(&config, &inputs)?.run_all(&config.scenarios)?;
            let dir = prepare_output(config.output.as_deref())?;
            write_run_header(&dir, &config, &inputs)?;
            write_backtests(&dir.join("backtest"), &inputs.table.dates, &results)?;
            Ok(dir)
        }
        Command::Frontier {
            run,
            backtest,
            compute_backtest,
        } => {
            let config = load_config(&run)?;
            let inputs = load_inputs(&config, compute_backtest)?;
            let placements = match (backtest, compute_backtest) {
                (Some(from), _) => placements_from_dir(&from)?,
                (None, true) => {
                    placements_in_run(&backtester(&config, &inputs)?.run_all(&config.scenarios)?)?
                }
                (None, false) => {
                    return Err(CliError::Dependency(
                        "frontier placements need backtest outputs: pass --backtest <dir> or --compute-backtest".into(),
                    ))
                }
            };
            let curve = frontier(&config, &inputs)?;
            let dir = prepare_output(config.output.as_deref())?;
            write_run_header(&dir, &config, &inputs)?;
            write_frontier(
                &dir.join("frontier"),
                &inputs.table.tickers,
                &curve,
                &placements,
            )?;
            Ok(dir)
        }
        Command::Suite(args) => {
            let config = load_config(&args)?;
            let inputs = load_inputs(&config, true)?;
            let bt = backtester(&config, &inputs)?;
            let windows = analyze(&config, &inputs, bt.geometries().to_vec())?;
            let results = bt.run_all(&config.scenarios)?;
            let placements = placements_in_run(&results)?;
            let curve = frontier(&config, &inputs)?;
            let dir = prepare_output(config.output.as_deref())?;
            write_run_header(&dir, &config, &inputs)?;
            write_analysis(&dir.join("analyze"), &config, &inputs, &windows)?;
            write_backtests(&dir.join("backtest"), &inputs.table.dates, &results)?;
            write_frontier(
                &dir.join("frontier"),
                &inputs.table.tickers,
                &curve,
                &placements,
            )?;
            Ok(dir)
        }
        Command::Synth(args) => synth(&args),
    }
}

fn synth(args: &SynthArgs) -> Result<PathBuf> {
    if args.assets < 2 {
        return Err(CliError::Config("--assets must be at least 2".into()));
    }
    if args.end <= args.start {
        return Err(CliError::Config("--end must come after --start".into()));
    }
    let (table, index) = synthetic_market(&MarketSpec {
        n_assets: args.assets,
        start: args.start,
        end: args.end,
        n_factors: args.factors,
        seed: args.seed,
    });
    let dir = prepare_output(Some(&args.out))?;
    write_with(&dir.join("prices.csv"), |w| {
        report::write_price_table_csv(w, &table)
    })?;
    write_with(&dir.join("index.csv"), |w| {
        report::write_index_csv(w, &index)
    })?;
    let config = serde_json::json!({
        "panel": "prices.csv",
        "index": "index.csv",
        "seed": args.seed,
    });
    write_with(&dir.join("config.json"), |w| report::write_json(w, &config))?;
    Ok(dir)
}
