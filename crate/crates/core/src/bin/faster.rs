//! Command-line front end for the relay incentive simulator.
//!
//! `faster run` executes one simulation and writes its CSV outputs;
//! `faster compare` runs faster-vs-baseline over a seed range and reports
//! how often the incentive scheme wins on richness equality and lifetime.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use faster_core::config::{apply, parse_config};
use faster_core::metrics::{compare_experiment, run_experiment, RunSummary};
use faster_core::sim::SimConfig;

#[derive(Parser)]
#[command(name = "faster", about = "Incentivized ad hoc relaying simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonOpts {
    /// Config file (`key = value` lines); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for the CSV files.
    #[arg(long)]
    out: PathBuf,
    /// Override the node count.
    #[arg(long)]
    nodes: Option<u32>,
    /// Override the tick count.
    #[arg(long)]
    ticks: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write timeseries/summary/plotdata CSVs.
    Run {
        #[command(flatten)]
        common: CommonOpts,
        /// Override the payment mode (`faster` or `baseline`).
        #[arg(long)]
        mode: Option<String>,
        /// Override the RNG seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the per-packet audit log (`packets.csv`).
        #[arg(long)]
        packet_log: bool,
    },
    /// Run both modes over a seed range and write `comparison.csv`.
    Compare {
        #[command(flatten)]
        common: CommonOpts,
        /// Inclusive seed range, e.g. `1..20`.
        #[arg(long)]
        seeds: String,
    },
}

fn load_config(common: &CommonOpts) -> Result<SimConfig, String> {
    let mut config = match &common.config {
        Some(path) => parse_config(path).map_err(|e| e.to_string())?,
        None => SimConfig::default(),
    };
    if let Some(nodes) = common.nodes {
        apply(&mut config, "n_nodes", &nodes.to_string(), 0).map_err(|e| e.to_string())?;
    }
    if let Some(ticks) = common.ticks {
        apply(&mut config, "ticks", &ticks.to_string(), 0).map_err(|e| e.to_string())?;
    }
    Ok(config)
}

/// Parses `a..b` (inclusive) or a single seed into a list.
fn parse_seed_range(text: &str) -> Result<Vec<u64>, String> {
    if let Some((a, b)) = text.split_once("..") {
        let start: u64 = a
            .trim()
            .parse()
            .map_err(|e| format!("bad seed range start `{a}`: {e}"))?;
        let end: u64 = b
            .trim()
            .parse()
            .map_err(|e| format!("bad seed range end `{b}`: {e}"))?;
        if end < start {
            return Err(format!("empty seed range `{text}`"));
        }
        Ok((start..=end).collect())
    } else {
        let seed: u64 = text
            .trim()
            .parse()
            .map_err(|e| format!("bad seed `{text}`: {e}"))?;
        Ok(vec![seed])
    }
}

fn run(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::Run {
            common,
            mode,
            seed,
            packet_log,
        } => {
            let mut config = load_config(&common)?;
            if let Some(mode) = mode {
                apply(&mut config, "mode", &mode, 0).map_err(|e| e.to_string())?;
            }
            if let Some(seed) = seed {
                apply(&mut config, "seed", &seed.to_string(), 0).map_err(|e| e.to_string())?;
            }
            let result =
                run_experiment(config, &common.out, packet_log).map_err(|e| e.to_string())?;
            let summary = RunSummary::from_result(&result);
            println!(
                "{} seed {}: {} sent, {} delivered ({:.1}%), richness stddev {:.2}, mean lifetime {:.2}",
                summary.mode,
                summary.seed,
                result.sent,
                result.delivered,
                summary.delivery_rate * 100.0,
                summary.richness_stddev_final,
                summary.mean_lifetime,
            );
            println!("wrote CSVs to {}", common.out.display());
            Ok(())
        }
        Command::Compare { common, seeds } => {
            let config = load_config(&common)?;
            let seeds = parse_seed_range(&seeds)?;
            let report =
                compare_experiment(&config, &seeds, &common.out).map_err(|e| e.to_string())?;
            for row in &report.rows {
                println!(
                    "seed {}: stddev {:.2} vs {:.2}, lifetime {:.2} vs {:.2}",
                    row.seed,
                    row.richness_stddev_final_faster,
                    row.richness_stddev_final_baseline,
                    row.mean_lifetime_faster,
                    row.mean_lifetime_baseline,
                );
            }
            println!(
                "faster wins richness equality in {:.0}% of seeds, lifetime in {:.0}%",
                report.stddev_win_fraction * 100.0,
                report.lifetime_win_fraction * 100.0,
            );
            println!("wrote comparison.csv to {}", common.out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}
