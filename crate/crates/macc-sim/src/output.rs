//! Metrics serialization: a machine record (JSON, one object per run) and a
//! flat CSV table (one row per flow plus a totals row per run), with a stable
//! field order and nothing nondeterministic.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{Metrics, Mode};

/// One finished run plus its identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub scenario: String,
    pub mode: Mode,
    pub seed: u64,
    pub metrics: Metrics,
}

impl RunRecord {
    pub fn new(scenario: &str, mode: Mode, seed: u64, metrics: Metrics) -> RunRecord {
        RunRecord {
            run_id: format!("{scenario}-{mode}-s{seed}"),
            scenario: scenario.to_string(),
            mode,
            seed,
            metrics,
        }
    }
}

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("writing `{path}`: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("encoding `{path}`: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

/// The CSV table columns, in order.
pub const CSV_COLUMNS: [&str; 14] = [
    "run_id",
    "mode",
    "seed",
    "flow_id",
    "sent",
    "delivered",
    "dropped_queue",
    "dropped_noroute",
    "loss_rate",
    "mean_delay_ms",
    "p95_delay_ms",
    "goodput_bps",
    "agent_overhead_ratio",
    "reroutes",
];

fn fmt_opt_ms(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x}"),
        None => "nan".to_string(),
    }
}

/// The CSV rows of one run: one per flow, then the totals row
/// (`flow_id = total`). Run-level fields repeat on every row.
pub fn csv_rows(record: &RunRecord) -> Vec<Vec<String>> {
    let m = &record.metrics;
    let base = |flow_id: String,
                sent: u64,
                delivered: u64,
                dq: u64,
                dn: u64,
                loss: f64,
                mean: Option<f64>,
                p95: Option<f64>,
                goodput: f64| {
        vec![
            record.run_id.clone(),
            record.mode.to_string(),
            record.seed.to_string(),
            flow_id,
            sent.to_string(),
            delivered.to_string(),
            dq.to_string(),
            dn.to_string(),
            format!("{loss}"),
            fmt_opt_ms(mean),
            fmt_opt_ms(p95),
            format!("{goodput}"),
            format!("{}", m.agent_overhead_ratio),
            m.reroutes.to_string(),
        ]
    };
    let mut rows: Vec<Vec<String>> = m
        .flows
        .iter()
        .map(|f| {
            base(
                f.flow.to_string(),
                f.sent,
                f.delivered,
                f.dropped_queue,
                f.dropped_noroute,
                f.loss_rate,
                f.mean_delay_ms,
                f.p95_delay_ms,
                f.goodput_bps,
            )
        })
        .collect();
    let t = &m.total;
    rows.push(base(
        "total".to_string(),
        t.sent,
        t.delivered,
        t.dropped_queue,
        t.dropped_noroute,
        t.loss_rate,
        t.mean_delay_ms,
        t.p95_delay_ms,
        t.goodput_bps,
    ));
    rows
}

/// Resolve an output base path into its `.csv` and `.json` siblings.
/// `results.csv`, `results.json` and `results` all map to the same pair.
pub fn output_paths(out: &Path) -> (PathBuf, PathBuf) {
    let stem = match out.extension().and_then(|e| e.to_str()) {
        Some("csv") | Some("json") => out.with_extension(""),
        _ => out.to_path_buf(),
    };
    (stem.with_extension("csv"), stem.with_extension("json"))
}

/// Write every run to `<out>.csv` (flat table) and `<out>.json` (array of
/// run records). Returns the two paths written.
pub fn write_metrics(records: &[RunRecord], out: &Path) -> Result<(PathBuf, PathBuf), OutputError> {
    let (csv_path, json_path) = output_paths(out);

    let mut w = csv::Writer::from_path(&csv_path).map_err(|source| OutputError::Csv {
        path: csv_path.clone(),
        source,
    })?;
    let wrap_csv = |source: csv::Error| OutputError::Csv {
        path: csv_path.clone(),
        source,
    };
    w.write_record(CSV_COLUMNS).map_err(wrap_csv)?;
    for record in records {
        for row in csv_rows(record) {
            w.write_record(&row).map_err(wrap_csv)?;
        }
    }
    w.flush().map_err(|source| OutputError::Io {
        path: csv_path.clone(),
        source,
    })?;

    let json = serde_json::to_string_pretty(records).expect("metrics serialize to JSON");
    let mut f = std::fs::File::create(&json_path).map_err(|source| OutputError::Io {
        path: json_path.clone(),
        source,
    })?;
    f.write_all(json.as_bytes())
        .and_then(|_| f.write_all(b"\n"))
        .map_err(|source| OutputError::Io {
            path: json_path.clone(),
            source,
        })?;

    Ok((csv_path, json_path))
}

/// Read a metrics JSON file back into run records.
pub fn read_metrics_json(path: &Path) -> Result<Vec<RunRecord>, OutputError> {
    let text = std::fs::read_to_string(path).map_err(|source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(serde_json::from_str(&text).expect("metrics JSON round-trips"))
}

/// Per-mode aggregate over a batch of runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeSummary {
    pub mode: Mode,
    pub runs: usize,
    pub mean_loss_rate: f64,
    pub mean_delay_ms: Option<f64>,
    pub mean_goodput_bps: f64,
    pub mean_overhead_ratio: f64,
    pub reroutes: u64,
}

/// Summarize runs per mode (agent first, then baseline).
pub fn summarize(records: &[RunRecord]) -> Vec<ModeSummary> {
    [Mode::Agent, Mode::Baseline]
        .into_iter()
        .filter_map(|mode| {
            let runs: Vec<&RunRecord> = records.iter().filter(|r| r.mode == mode).collect();
            if runs.is_empty() {
                return None;
            }
            let n = runs.len() as f64;
            let delays: Vec<f64> = runs
                .iter()
                .filter_map(|r| r.metrics.total.mean_delay_ms)
                .collect();
            Some(ModeSummary {
                mode,
                runs: runs.len(),
                mean_loss_rate: runs.iter().map(|r| r.metrics.total.loss_rate).sum::<f64>() / n,
                mean_delay_ms: if delays.is_empty() {
                    None
                } else {
                    Some(delays.iter().sum::<f64>() / delays.len() as f64)
                },
                mean_goodput_bps: runs.iter().map(|r| r.metrics.total.goodput_bps).sum::<f64>()
                    / n,
                mean_overhead_ratio: runs
                    .iter()
                    .map(|r| r.metrics.agent_overhead_ratio)
                    .sum::<f64>()
                    / n,
                reroutes: runs.iter().map(|r| r.metrics.reroutes).sum(),
            })
        })
        .collect()
}
