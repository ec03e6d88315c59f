//! Per-iteration instrumentation and machine-readable export.
//!
//! One [`MetricsRecord`] per training iteration, exportable as CSV (header
//! plus one row per record) or JSONL (one object per line). Exports are
//! lossless: floats are written in shortest round-trip form, so
//! export-then-import returns the records bit-for-bit, and identical runs
//! produce byte-identical files.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::RolloutGroup;
use crate::policy::{self, PolicyParams, Token};

/// Scalar diagnostics for one training iteration.
///
/// `mean_best_draft_reward` is absent when the run draws no Stage-1 drafts
/// (plain GRPO). `wall_time_seconds` is kept at zero in machine outputs so
/// reruns stay byte-identical; measured timing goes to the human summary on
/// stdout instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub iteration: u64,
    pub mean_stage2_reward: f64,
    pub mean_best_draft_reward: Option<f64>,
    pub mean_token_entropy_nats: f64,
    pub mean_response_length: f64,
    pub clip_fraction: f64,
    pub mean_kl: f64,
    pub learning_rate: f64,
    pub rollout_count: u64,
    pub wall_time_seconds: f64,
}

/// Column order for CSV export; must match the struct field order.
const COLUMNS: [&str; 10] = [
    "iteration",
    "mean_stage2_reward",
    "mean_best_draft_reward",
    "mean_token_entropy_nats",
    "mean_response_length",
    "clip_fraction",
    "mean_kl",
    "learning_rate",
    "rollout_count",
    "wall_time_seconds",
];

/// Export file format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Jsonl,
}

/// Mean per-token entropy (nats) over a batch of contexts, one context per
/// generated token position, each position weighted equally.
///
/// Uses a streaming mean, which is exact for a constant stream — a
/// zero-initialized policy reports exactly `ln |V|` no matter how many
/// positions the batch contains.
pub fn mean_token_entropy<I, C>(params: &PolicyParams, contexts: I) -> Result<f64>
where
    I: IntoIterator<Item = C>,
    C: AsRef<[Token]>,
{
    let mut mean = 0.0;
    let mut count = 0u64;
    for context in contexts {
        let h = policy::token_entropy(params, context.as_ref())?;
        count += 1;
        mean += (h - mean) / count as f64;
    }
    if count == 0 {
        return Err(Error::UndefinedMetric(
            "mean token entropy of an empty batch".into(),
        ));
    }
    Ok(mean)
}

/// [`mean_token_entropy`] over every generated token position of the groups,
/// without materializing the contexts.
pub fn group_token_entropy(params: &PolicyParams, groups: &[RolloutGroup]) -> Result<f64> {
    let mut mean = 0.0;
    let mut count = 0u64;
    let mut ctx = Vec::new();
    for group in groups {
        for completion in group.completions() {
            ctx.clear();
            ctx.extend_from_slice(group.context());
            for &token in completion {
                let h = policy::token_entropy(params, &ctx)?;
                count += 1;
                mean += (h - mean) / count as f64;
                ctx.push(token);
            }
        }
    }
    if count == 0 {
        return Err(Error::UndefinedMetric(
            "mean token entropy of an empty batch".into(),
        ));
    }
    Ok(mean)
}

/// Mean completion length (tokens) across the groups.
pub fn mean_response_length(groups: &[RolloutGroup]) -> f64 {
    let total: usize = groups.iter().map(|g| g.token_count()).sum();
    let count: usize = groups.iter().map(|g| g.group_size()).sum();
    total as f64 / count.max(1) as f64
}

fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// Serializes records in iteration order to `w`.
pub fn write_records<W: Write>(
    records: &[MetricsRecord],
    format: ExportFormat,
    mut w: W,
) -> std::io::Result<()> {
    match format {
        ExportFormat::Csv => {
            writeln!(w, "{}", COLUMNS.join(","))?;
            for r in records {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{},{},{}",
                    r.iteration,
                    fmt_f64(r.mean_stage2_reward),
                    fmt_opt(r.mean_best_draft_reward),
                    fmt_f64(r.mean_token_entropy_nats),
                    fmt_f64(r.mean_response_length),
                    fmt_f64(r.clip_fraction),
                    fmt_f64(r.mean_kl),
                    fmt_f64(r.learning_rate),
                    r.rollout_count,
                    fmt_f64(r.wall_time_seconds),
                )?;
            }
        }
        ExportFormat::Jsonl => {
            for r in records {
                let line = serde_json::to_string(r).expect("record serializes");
                writeln!(w, "{line}")?;
            }
        }
    }
    Ok(())
}

/// Parses either export format back into records.
pub fn read_records<R: BufRead>(format: ExportFormat, r: R) -> Result<Vec<MetricsRecord>> {
    let mut out = Vec::new();
    match format {
        ExportFormat::Csv => {
            let mut lines = r.lines().enumerate();
            let header = match lines.next() {
                Some((_, line)) => {
                    line.map_err(|e| Error::InvalidInput(format!("csv header: {e}")))?
                }
                None => return Err(Error::InvalidInput("csv file is empty".into())),
            };
            if header != COLUMNS.join(",") {
                return Err(Error::InvalidInput(format!("unexpected csv header {header:?}")));
            }
            for (i, line) in lines {
                let line = line.map_err(|e| Error::InvalidInput(format!("csv line {i}: {e}")))?;
                if line.is_empty() {
                    continue;
                }
                let cells: Vec<&str> = line.split(',').collect();
                if cells.len() != COLUMNS.len() {
                    return Err(Error::InvalidInput(format!(
                        "csv line {i}: {} cells, expected {}",
                        cells.len(),
                        COLUMNS.len()
                    )));
                }
                let num = |j: usize| -> Result<f64> {
                    cells[j].parse().map_err(|_| {
                        Error::InvalidInput(format!("csv line {i}, column {}: {:?}", COLUMNS[j], cells[j]))
                    })
                };
                out.push(MetricsRecord {
                    iteration: cells[0]
                        .parse()
                        .map_err(|_| Error::InvalidInput(format!("csv line {i}: iteration")))?,
                    mean_stage2_reward: num(1)?,
                    mean_best_draft_reward: if cells[2].is_empty() {
                        None
                    } else {
                        Some(num(2)?)
                    },
                    mean_token_entropy_nats: num(3)?,
                    mean_response_length: num(4)?,
                    clip_fraction: num(5)?,
                    mean_kl: num(6)?,
                    learning_rate: num(7)?,
                    rollout_count: cells[8]
                        .parse()
                        .map_err(|_| Error::InvalidInput(format!("csv line {i}: rollout_count")))?,
                    wall_time_seconds: num(9)?,
                });
            }
        }
        ExportFormat::Jsonl => {
            for (i, line) in r.lines().enumerate() {
                let line = line.map_err(|e| Error::InvalidInput(format!("jsonl line {i}: {e}")))?;
                if line.trim().is_empty() {
                    continue;
                }
                let record = serde_json::from_str(&line)
                    .map_err(|e| Error::InvalidInput(format!("jsonl line {i}: {e}")))?;
                out.push(record);
            }
        }
    }
    Ok(out)
}

/// Writes `records` to `path` in the given format.
pub fn export(records: &[MetricsRecord], path: &Path, format: ExportFormat) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    write_records(records, format, std::io::BufWriter::new(file))
        .map_err(|e| Error::io(path.display().to_string(), e))
}

/// Reads records back from `path`.
pub fn import(path: &Path, format: ExportFormat) -> Result<Vec<MetricsRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    read_records(format, std::io::BufReader::new(file))
}
