//! `articulate`: generate scenes, simulate predictions, fit poses and
//! evaluate them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use articulate_core::pipeline::Method;
use clap::{Parser, Subcommand};

use crate::commands::EvalOptions;
use crate::config::RunConfig;

#[derive(Parser)]
#[command(name = "articulate", version, about = "Articulated object pose pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output path of the subcommand.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a procedural model and a dataset of scenes.
    Generate,
    /// Write one simulated prediction file per scene.
    Predict,
    /// Estimate part poses and joints for every scene.
    Fit {
        #[arg(long, value_parser = parse_method)]
        method: Option<Method>,
    },
    /// Score estimates and write CSV and JSON reports.
    Eval {
        /// Include AD accuracy.
        #[arg(long)]
        ad: bool,
        /// Visibility bin edges from 0 to 1.
        #[arg(long, value_delimiter = ',')]
        occlusion_bins: Option<Vec<f64>>,
        /// Fit and compare these methods from the prediction files.
        #[arg(long, value_delimiter = ',', value_parser = parse_method)]
        compare: Option<Vec<Method>>,
    },
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: articulate_core::Error| e.to_string())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Generate => {
            if let Some(out) = cli.out {
                cfg.paths.dataset = out;
            }
            cfg.validate()?;
            commands::generate(&cfg)
        }
        Command::Predict => {
            if let Some(out) = cli.out {
                cfg.paths.predictions = out;
            }
            cfg.validate()?;
            commands::predict(&cfg)
        }
        Command::Fit { method } => {
            if let Some(out) = cli.out {
                cfg.paths.estimates = out;
            }
            if let Some(m) = method {
                cfg.method = m;
            }
            cfg.validate()?;
            commands::fit(&cfg)
        }
        Command::Eval {
            ad,
            occlusion_bins,
            compare,
        } => {
            if let Some(out) = cli.out {
                cfg.paths.report = out;
            }
            cfg.ad |= ad;
            if occlusion_bins.is_some() {
                cfg.occlusion_bins = occlusion_bins;
            }
            if compare.is_some() {
                cfg.compare = compare;
            }
            cfg.validate()?;
            let opts = EvalOptions {
                ad: cfg.ad,
                occlusion_bins: cfg.occlusion_bins.clone(),
                compare: cfg.compare.clone(),
            };
            commands::eval(&cfg, &opts)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ARTICULATE_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
