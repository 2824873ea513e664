//! Command-line front door: run one experiment, compare the agent protocol
//! against the congestion-blind baseline, sweep a parameter, or validate a
//! scenario file.
//!
//! Exit codes: 0 success, 1 runtime fault (e.g. output destination), 2 bad
//! usage or bad input. Nothing nondeterministic is ever printed into metrics
//! files.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::engine::{self, Mode};
use crate::output::{summarize, write_metrics, ModeSummary, OutputError, RunRecord, CSV_COLUMNS};
use crate::scenario::{load_scenario, Scenario, ScenarioError};

#[derive(Parser)]
#[command(
    name = "macc-sim",
    version,
    about = "Discrete-event simulator of mobile-agent congestion control in multi-rate ad-hoc networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario once and write its metrics
    Run(RunArgs),
    /// Run agent and baseline modes over a seed range and summarize both
    Compare(CompareArgs),
    /// Re-run a comparison at several values of one parameter
    Sweep(SweepArgs),
    /// Parse and validate a scenario file
    Validate(ValidateArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (TOML)
    scenario: PathBuf,
    /// Router driving the run
    #[arg(long, default_value = "agent")]
    mode: Mode,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output base path; writes <out>.csv and <out>.json
    #[arg(long, default_value = "metrics")]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    scenario: PathBuf,
    /// Inclusive seed range, e.g. 0..9, or a single seed
    #[arg(long, default_value = "0..9")]
    seeds: String,
    #[arg(long, default_value = "compare")]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    scenario: PathBuf,
    /// One of: offered_load, probe_size_bits, propagation_interval_ns
    #[arg(long)]
    param: String,
    /// Comma-separated values, e.g. 0.5,1.0,2.0
    #[arg(long, value_delimiter = ',')]
    values: Vec<f64>,
    #[arg(long, default_value = "0..0")]
    seeds: String,
    #[arg(long, default_value = "sweep")]
    out: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    scenario: PathBuf,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("reading `{path}`: {source}")]
    ReadScenario {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Scenario {
        path: PathBuf,
        #[source]
        source: ScenarioError,
    },
    #[error("unknown sweep parameter `{0}` (offered_load|probe_size_bits|propagation_interval_ns)")]
    UnknownParam(String),
    #[error("no sweep values given")]
    EmptyValues,
    #[error("sweep value {value} is not valid for `{param}`")]
    BadSweepValue { param: &'static str, value: f64 },
    #[error("invalid seed range `{0}` (expected N..M or a single seed)")]
    BadSeeds(String),
    #[error(transparent)]
    Output(#[from] OutputError),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Output(_) => 1,
            _ => 2,
        }
    }
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run(args) => cmd_run(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Validate(args) => cmd_validate(args),
    }
}

fn load(path: &Path) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::ReadScenario {
        path: path.to_path_buf(),
        source,
    })?;
    load_scenario(&text).map_err(|source| CliError::Scenario {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_seeds(text: &str) -> Result<std::ops::RangeInclusive<u64>, CliError> {
    let bad = || CliError::BadSeeds(text.to_string());
    if let Some((lo, hi)) = text.split_once("..") {
        let lo: u64 = lo.parse().map_err(|_| bad())?;
        let hi: u64 = hi.parse().map_err(|_| bad())?;
        if lo > hi {
            return Err(bad());
        }
        Ok(lo..=hi)
    } else {
        let seed: u64 = text.parse().map_err(|_| bad())?;
        Ok(seed..=seed)
    }
}

fn print_totals_rows(records: &[RunRecord]) {
    println!("{}", CSV_COLUMNS.join(","));
    for record in records {
        let rows = crate::output::csv_rows(record);
        let totals = rows.last().expect("totals row always present");
        println!("{}", totals.join(","));
    }
}

fn print_summaries(summaries: &[ModeSummary]) {
    for s in summaries {
        println!(
            "{}: runs={} mean_loss_rate={:.6} mean_delay_ms={} mean_goodput_bps={:.0} mean_overhead_ratio={:.6} reroutes={}",
            s.mode,
            s.runs,
            s.mean_loss_rate,
            s.mean_delay_ms
                .map(|d| format!("{d:.3}"))
                .unwrap_or_else(|| "nan".to_string()),
            s.mean_goodput_bps,
            s.mean_overhead_ratio,
            s.reroutes,
        );
    }
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let scenario = load(&args.scenario)?;
    let metrics = engine::run(&scenario, args.mode, args.seed);
    let record = RunRecord::new(&scenario.name, args.mode, args.seed, metrics);
    let (csv_path, json_path) = write_metrics(std::slice::from_ref(&record), &args.out)?;
    print_totals_rows(std::slice::from_ref(&record));
    eprintln!("wrote {} and {}", csv_path.display(), json_path.display());
    Ok(())
}

fn cmd_compare(args: CompareArgs) -> Result<(), CliError> {
    let scenario = load(&args.scenario)?;
    let seeds = parse_seeds(&args.seeds)?;
    let mut records = Vec::new();
    for seed in seeds {
        for mode in [Mode::Agent, Mode::Baseline] {
            let metrics = engine::run(&scenario, mode, seed);
            records.push(RunRecord::new(&scenario.name, mode, seed, metrics));
        }
    }
    let (csv_path, json_path) = write_metrics(&records, &args.out)?;
    print_summaries(&summarize(&records));
    eprintln!("wrote {} and {}", csv_path.display(), json_path.display());
    Ok(())
}

enum SweepParam {
    OfferedLoad,
    ProbeSizeBits,
    PropagationIntervalNs,
}

impl SweepParam {
    fn parse(text: &str) -> Result<SweepParam, CliError> {
        match text {
            "offered_load" => Ok(SweepParam::OfferedLoad),
            "probe_size_bits" => Ok(SweepParam::ProbeSizeBits),
            "propagation_interval_ns" => Ok(SweepParam::PropagationIntervalNs),
            other => Err(CliError::UnknownParam(other.to_string())),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            SweepParam::OfferedLoad => "offered_load",
            SweepParam::ProbeSizeBits => "probe_size_bits",
            SweepParam::PropagationIntervalNs => "propagation_interval_ns",
        }
    }

    fn apply(&self, scenario: &Scenario, value: f64) -> Result<Scenario, CliError> {
        let bad = || CliError::BadSweepValue {
            param: self.name(),
            value,
        };
        match self {
            SweepParam::OfferedLoad => {
                if value <= 0.0 || !value.is_finite() {
                    return Err(bad());
                }
                Ok(scenario.with_offered_load(value))
            }
            SweepParam::ProbeSizeBits | SweepParam::PropagationIntervalNs => {
                if value < 1.0 || value.fract() != 0.0 || !value.is_finite() {
                    return Err(bad());
                }
                let mut out = scenario.clone();
                match self {
                    SweepParam::ProbeSizeBits => out.params.probe_size_bits = value as u64,
                    SweepParam::PropagationIntervalNs => {
                        out.params.propagation_interval_ns = value as u64
                    }
                    SweepParam::OfferedLoad => unreachable!(),
                }
                Ok(out)
            }
        }
    }
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    let scenario = load(&args.scenario)?;
    let param = SweepParam::parse(&args.param)?;
    if args.values.is_empty() {
        return Err(CliError::EmptyValues);
    }
    let seeds = parse_seeds(&args.seeds)?;

    let mut records = Vec::new();
    let mut blocks: Vec<(f64, usize)> = Vec::new(); // (value, records start)
    for &value in &args.values {
        let variant = param.apply(&scenario, value)?;
        blocks.push((value, records.len()));
        for seed in seeds.clone() {
            for mode in [Mode::Agent, Mode::Baseline] {
                let metrics = engine::run(&variant, mode, seed);
                records.push(RunRecord {
                    run_id: format!(
                        "{}-{}={}-{}-s{}",
                        scenario.name,
                        param.name(),
                        value,
                        mode,
                        seed
                    ),
                    scenario: scenario.name.clone(),
                    mode,
                    seed,
                    metrics,
                });
            }
        }
    }
    let (csv_path, json_path) = write_metrics(&records, &args.out)?;
    for (i, &(value, start)) in blocks.iter().enumerate() {
        let end = blocks.get(i + 1).map(|&(_, s)| s).unwrap_or(records.len());
        println!("{}={}", param.name(), value);
        print_summaries(&summarize(&records[start..end]));
    }
    eprintln!("wrote {} and {}", csv_path.display(), json_path.display());
    Ok(())
}

fn cmd_validate(args: ValidateArgs) -> Result<(), CliError> {
    let scenario = load(&args.scenario)?;
    println!(
        "ok: {}: {} nodes, {} links, {} flows, {} events, duration {}s",
        scenario.name,
        scenario.topology.node_count(),
        scenario.topology.links().len(),
        scenario.flows.len(),
        scenario.topology.events.len(),
        scenario.duration.as_secs_f64(),
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_ranges() {
        assert_eq!(parse_seeds("0..9").unwrap(), 0..=9);
        assert_eq!(parse_seeds("5").unwrap(), 5..=5);
        assert!(parse_seeds("9..0").is_err());
        assert!(parse_seeds("x..y").is_err());
    }

    #[test]
    fn sweep_param_validation() {
        let text = std::fs::read_to_string(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/scenarios/two_node.toml"
        ))
        .unwrap();
        let s = load_scenario(&text).unwrap();
        assert!(SweepParam::parse("bogus").is_err());
        let p = SweepParam::parse("offered_load").unwrap();
        assert!(p.apply(&s, -1.0).is_err());
        assert_eq!(p.apply(&s, 2.0).unwrap().flows[0].rate_bps, 2_000_000);
        let p = SweepParam::parse("probe_size_bits").unwrap();
        assert!(p.apply(&s, 0.5).is_err());
        assert_eq!(p.apply(&s, 4000.0).unwrap().params.probe_size_bits, 4_000);
    }
}
