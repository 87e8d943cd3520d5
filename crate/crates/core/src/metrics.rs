//! Experiment orchestration and CSV emission.
//!
//! A run writes four files into its output directory:
//!
//! * `timeseries.csv` — `tick,node_id,battery_j,richness,alive`, one row per
//!   node per tick (tick 0 is the initial snapshot)
//! * `summary.csv` — one row of end-of-run statistics
//! * `plotdata_richness.csv` / `plotdata_battery.csv` — tick × node matrices
//!   ready for plotting
//!
//! Floats are printed with Rust's shortest round-trip formatting, so parsing
//! a file reproduces the in-memory values exactly and repeated runs of the
//! same config are byte-identical.

use std::collections::BTreeMap;
use std::error::Error;
use std::fmt;
use std::fs;
use std::io;
use std::path::Path;

use crate::sim::{
    DropCounts, InvalidConfig, Mode, SimConfig, SimResult, Simulation, TimeSeriesRow,
};
use crate::NodeId;

/// End-of-run statistics for one (mode, seed) execution.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub mode: Mode,
    pub seed: u64,
    /// Population standard deviation of final richness across nodes.
    pub richness_stddev_final: f64,
    /// Mean death tick; survivors count as `ticks + 1`.
    pub mean_lifetime: f64,
    pub delivery_rate: f64,
    pub drops: DropCounts,
}

/// Population standard deviation.
fn stddev(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    var.sqrt()
}

impl RunSummary {
    pub fn from_result(result: &SimResult) -> RunSummary {
        let final_tick = result.config.ticks;
        let final_richness: Vec<f64> = result
            .time_series
            .iter()
            .filter(|r| r.tick == final_tick)
            .map(|r| r.richness as f64)
            .collect();
        let lifetimes: Vec<f64> = result
            .death_tick
            .values()
            .map(|d| match d {
                Some(tick) => *tick as f64,
                None => (result.config.ticks + 1) as f64,
            })
            .collect();
        let mean_lifetime = if lifetimes.is_empty() {
            0.0
        } else {
            lifetimes.iter().sum::<f64>() / lifetimes.len() as f64
        };
        let delivery_rate = if result.sent == 0 {
            0.0
        } else {
            result.delivered as f64 / result.sent as f64
        };
        RunSummary {
            mode: result.config.mode,
            seed: result.config.seed,
            richness_stddev_final: stddev(&final_richness),
            mean_lifetime,
            delivery_rate,
            drops: result.drops,
        }
    }
}

pub const TIMESERIES_HEADER: &str = "tick,node_id,battery_j,richness,alive";
pub const SUMMARY_HEADER: &str = "mode,seed,richness_stddev_final,mean_lifetime,delivery_rate,\
drops_no_route,drops_cannot_afford,drops_relay_refused,drops_negative_payoff,drops_node_died";

pub fn timeseries_csv(rows: &[TimeSeriesRow]) -> String {
    let mut out = String::from(TIMESERIES_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.tick, r.node_id, r.battery, r.richness, r.alive
        ));
    }
    out
}

/// Parses the [`timeseries_csv`] format; exact inverse of emission.
pub fn parse_timeseries_csv(text: &str) -> Result<Vec<TimeSeriesRow>, String> {
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 {
            if line != TIMESERIES_HEADER {
                return Err(format!("unexpected header `{line}`"));
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(format!("line {}: expected 5 fields", idx + 1));
        }
        let parse_err = |what: &str, e: &dyn fmt::Display| format!("line {}: {what}: {e}", idx + 1);
        rows.push(TimeSeriesRow {
            tick: fields[0].parse().map_err(|e| parse_err("tick", &e))?,
            node_id: NodeId(fields[1].parse().map_err(|e| parse_err("node_id", &e))?),
            battery: fields[2].parse().map_err(|e| parse_err("battery", &e))?,
            richness: fields[3].parse().map_err(|e| parse_err("richness", &e))?,
            alive: fields[4].parse().map_err(|e| parse_err("alive", &e))?,
        });
    }
    Ok(rows)
}

pub fn summary_csv(summary: &RunSummary) -> String {
    format!(
        "{}\n{},{},{},{},{},{},{},{},{},{}\n",
        SUMMARY_HEADER,
        summary.mode,
        summary.seed,
        summary.richness_stddev_final,
        summary.mean_lifetime,
        summary.delivery_rate,
        summary.drops.no_route,
        summary.drops.cannot_afford,
        summary.drops.relay_refused,
        summary.drops.negative_payoff,
        summary.drops.node_died,
    )
}

/// Tick × node matrix of one per-node quantity.
fn plotdata_csv(rows: &[TimeSeriesRow], value: impl Fn(&TimeSeriesRow) -> String) -> String {
    let mut node_ids: Vec<NodeId> = Vec::new();
    let mut ticks: Vec<u64> = Vec::new();
    let mut cells: BTreeMap<(u64, NodeId), String> = BTreeMap::new();
    for r in rows {
        if !node_ids.contains(&r.node_id) {
            node_ids.push(r.node_id);
        }
        if ticks.last() != Some(&r.tick) && !ticks.contains(&r.tick) {
            ticks.push(r.tick);
        }
        cells.insert((r.tick, r.node_id), value(r));
    }
    node_ids.sort();
    ticks.sort_unstable();

    let mut out = String::from("tick");
    for id in &node_ids {
        out.push_str(&format!(",node_{id}"));
    }
    out.push('\n');
    for &tick in &ticks {
        out.push_str(&tick.to_string());
        for id in &node_ids {
            out.push(',');
            if let Some(cell) = cells.get(&(tick, *id)) {
                out.push_str(cell);
            }
        }
        out.push('\n');
    }
    out
}

pub fn plotdata_richness_csv(rows: &[TimeSeriesRow]) -> String {
    plotdata_csv(rows, |r| r.richness.to_string())
}

pub fn plotdata_battery_csv(rows: &[TimeSeriesRow]) -> String {
    plotdata_csv(rows, |r| r.battery.to_string())
}

pub const PACKET_LOG_HEADER: &str = "tick,sender,destination,route,outcome,charge";

/// Send-attempt audit log; the route is the full hyphen-joined node path.
pub fn packet_log_csv(result: &SimResult) -> String {
    let mut out = String::from(PACKET_LOG_HEADER);
    out.push('\n');
    for p in &result.packets {
        let route = p
            .path
            .iter()
            .map(|id| id.to_string())
            .collect::<Vec<_>>()
            .join("-");
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            p.tick, p.sender, p.destination, route, p.outcome, p.charge
        ));
    }
    out
}

#[derive(Debug)]
pub enum RunError {
    Config(InvalidConfig),
    Io(io::Error),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "{e}"),
            RunError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl Error for RunError {}

impl From<InvalidConfig> for RunError {
    fn from(e: InvalidConfig) -> Self {
        RunError::Config(e)
    }
}

impl From<io::Error> for RunError {
    fn from(e: io::Error) -> Self {
        RunError::Io(e)
    }
}

/// Runs one simulation and writes its CSV outputs into `out_dir`.
/// With `packet_log` set, also writes `packets.csv`.
pub fn run_experiment(
    config: SimConfig,
    out_dir: impl AsRef<Path>,
    packet_log: bool,
) -> Result<SimResult, RunError> {
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir)?;
    let result = Simulation::run(config)?;
    write_result_files(&result, out_dir, packet_log)?;
    Ok(result)
}

pub fn write_result_files(
    result: &SimResult,
    out_dir: &Path,
    packet_log: bool,
) -> Result<(), io::Error> {
    let summary = RunSummary::from_result(result);
    fs::write(
        out_dir.join("timeseries.csv"),
        timeseries_csv(&result.time_series),
    )?;
    fs::write(out_dir.join("summary.csv"), summary_csv(&summary))?;
    fs::write(
        out_dir.join("plotdata_richness.csv"),
        plotdata_richness_csv(&result.time_series),
    )?;
    fs::write(
        out_dir.join("plotdata_battery.csv"),
        plotdata_battery_csv(&result.time_series),
    )?;
    if packet_log {
        fs::write(out_dir.join("packets.csv"), packet_log_csv(result))?;
    }
    Ok(())
}

/// One seed's faster-vs-baseline numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub seed: u64,
    pub richness_stddev_final_faster: f64,
    pub richness_stddev_final_baseline: f64,
    pub mean_lifetime_faster: f64,
    pub mean_lifetime_baseline: f64,
}

/// Outcome of a multi-seed faster-vs-baseline batch.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
    /// Fraction of seeds where faster's final richness spread is strictly
    /// lower than baseline's.
    pub stddev_win_fraction: f64,
    /// Fraction of seeds where faster's mean lifetime is strictly higher.
    pub lifetime_win_fraction: f64,
}

pub const COMPARISON_HEADER: &str = "seed,richness_stddev_final_faster,\
richness_stddev_final_baseline,mean_lifetime_faster,mean_lifetime_baseline";

pub fn comparison_csv(report: &ComparisonReport) -> String {
    let mut out = String::from(COMPARISON_HEADER);
    out.push('\n');
    for r in &report.rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.seed,
            r.richness_stddev_final_faster,
            r.richness_stddev_final_baseline,
            r.mean_lifetime_faster,
            r.mean_lifetime_baseline
        ));
    }
    out
}

/// Runs both modes for every seed (otherwise identical config) and tallies
/// how often the incentive scheme wins each metric.
pub fn compare_modes(config: &SimConfig, seeds: &[u64]) -> Result<ComparisonReport, InvalidConfig> {
    assert!(!seeds.is_empty(), "need at least one seed");
    let mut rows = Vec::with_capacity(seeds.len());
    let mut stddev_wins = 0usize;
    let mut lifetime_wins = 0usize;
    for &seed in seeds {
        let run_mode = |mode: Mode| -> Result<RunSummary, InvalidConfig> {
            let cfg = SimConfig {
                mode,
                seed,
                ..config.clone()
            };
            Ok(RunSummary::from_result(&Simulation::run(cfg)?))
        };
        let faster = run_mode(Mode::Faster)?;
        let baseline = run_mode(Mode::Baseline)?;
        if faster.richness_stddev_final < baseline.richness_stddev_final {
            stddev_wins += 1;
        }
        if faster.mean_lifetime > baseline.mean_lifetime {
            lifetime_wins += 1;
        }
        rows.push(ComparisonRow {
            seed,
            richness_stddev_final_faster: faster.richness_stddev_final,
            richness_stddev_final_baseline: baseline.richness_stddev_final,
            mean_lifetime_faster: faster.mean_lifetime,
            mean_lifetime_baseline: baseline.mean_lifetime,
        });
    }
    let n = seeds.len() as f64;
    Ok(ComparisonReport {
        rows,
        stddev_win_fraction: stddev_wins as f64 / n,
        lifetime_win_fraction: lifetime_wins as f64 / n,
    })
}

/// Runs [`compare_modes`] and writes `comparison.csv` into `out_dir`.
pub fn compare_experiment(
    config: &SimConfig,
    seeds: &[u64],
    out_dir: impl AsRef<Path>,
) -> Result<ComparisonReport, RunError> {
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir)?;
    let report = compare_modes(config, seeds)?;
    fs::write(out_dir.join("comparison.csv"), comparison_csv(&report))?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> SimConfig {
        SimConfig {
            n_nodes: 6,
            ticks: 40,
            seed: 3,
            ..SimConfig::default()
        }
    }

    #[test]
    fn timeseries_round_trip_is_exact() {
        let result = Simulation::run(small_config()).unwrap();
        let csv = timeseries_csv(&result.time_series);
        let parsed = parse_timeseries_csv(&csv).unwrap();
        assert_eq!(parsed, result.time_series);
    }

    #[test]
    fn summary_recomputes_from_timeseries() {
        let result = Simulation::run(small_config()).unwrap();
        let summary = RunSummary::from_result(&result);
        let parsed = parse_timeseries_csv(&timeseries_csv(&result.time_series)).unwrap();
        let finals: Vec<f64> = parsed
            .iter()
            .filter(|r| r.tick == result.config.ticks)
            .map(|r| r.richness as f64)
            .collect();
        assert!((stddev(&finals) - summary.richness_stddev_final).abs() < 1e-9);
    }

    #[test]
    fn plotdata_has_one_row_per_tick() {
        let result = Simulation::run(small_config()).unwrap();
        let csv = plotdata_richness_csv(&result.time_series);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 1 + 41); // header + ticks 0..=40
        assert_eq!(lines[0], "tick,node_0,node_1,node_2,node_3,node_4,node_5");
        assert!(lines[1].starts_with("0,"));
        assert_eq!(lines[1].split(',').count(), 7);
    }

    #[test]
    fn experiment_files_are_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a");
        let b = dir.path().join("b");
        run_experiment(small_config(), &a, true).unwrap();
        run_experiment(small_config(), &b, true).unwrap();
        for name in [
            "timeseries.csv",
            "summary.csv",
            "plotdata_richness.csv",
            "plotdata_battery.csv",
            "packets.csv",
        ] {
            let left = fs::read(a.join(name)).unwrap();
            let right = fs::read(b.join(name)).unwrap();
            assert_eq!(left, right, "{name} differs between identical runs");
        }
    }

    #[test]
    fn zero_tick_timeseries_has_header_plus_nodes() {
        let config = SimConfig {
            ticks: 0,
            ..small_config()
        };
        let result = Simulation::run(config).unwrap();
        let csv = timeseries_csv(&result.time_series);
        assert_eq!(csv.lines().count(), 1 + 6);
    }

    #[test]
    fn comparison_runs_both_modes() {
        let config = SimConfig {
            ticks: 30,
            ..small_config()
        };
        let report = compare_modes(&config, &[1]).unwrap();
        assert_eq!(report.rows.len(), 1);
        assert!(report.stddev_win_fraction == 0.0 || report.stddev_win_fraction == 1.0);
        assert!((0.0..=1.0).contains(&report.lifetime_win_fraction));
    }

    #[test]
    fn summary_csv_shape() {
        let result = Simulation::run(small_config()).unwrap();
        let summary = RunSummary::from_result(&result);
        let csv = summary_csv(&summary);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], SUMMARY_HEADER);
        assert!(lines[1].starts_with("faster,3,"));
        assert_eq!(lines[1].split(',').count(), 10);
    }
}
