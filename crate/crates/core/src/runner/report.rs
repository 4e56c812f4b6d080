//! Report types and emission.
//!
//! The report body is a pure function of (config, master seed): cells keep
//! their configured order, rows their insertion order, and anything
//! wall-clock-dependent is banished to [`RunMeta`]. `emit_report` renders
//! the same struct as machine-friendly CSV, round-trippable JSON, or
//! markdown tables grouped the way the accompanying write-ups group them
//! (partition methods, overlapping methods, baseline).

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{MetricRow, MetricValue};
use crate::runner::{Algorithm, Task};

/// Position of one cell in the experiment matrix. `kind` is the propensity
/// or center centrality for the tasks that have one, `"none"` otherwise.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellKey {
    pub dataset: String,
    pub task: Task,
    pub algorithm: Algorithm,
    pub kind: String,
}

impl fmt::Display for CellKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}|{}|{}|{}", self.dataset, self.task, self.algorithm, self.kind)
    }
}

/// Outcome of one cell: its metric rows, or the error that stopped it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub key: CellKey,
    /// Sub-seed the cell ran with.
    pub seed: u64,
    pub rows: Vec<MetricRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

/// Shape evidence for one detected cover, kept per algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverRecord {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub communities: usize,
    pub min_size: usize,
    pub median_size: usize,
    pub max_size: usize,
    /// Mean memberships per covered node; 1.0 for partitions.
    pub overlap_rate: f64,
    /// Configured quality functions (modularity, mean density).
    pub quality: Vec<MetricRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

/// Everything a run produces except timings: the comparable artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub dataset: String,
    pub master_seed: u64,
    pub config_hash: String,
    pub covers: Vec<CoverRecord>,
    pub cells: Vec<CellResult>,
}

impl ExperimentReport {
    /// True when any cover or cell carries a failure record.
    pub fn has_failures(&self) -> bool {
        self.covers.iter().any(|c| c.failure.is_some())
            || self.cells.iter().any(|c| c.failure.is_some())
    }
}

/// Wall-clock observations for one run; emitted separately so reruns can be
/// compared byte for byte on the report itself.
#[derive(Debug, Clone, Default, Serialize)]
pub struct RunMeta {
    pub total_ms: u128,
    /// (cell key, milliseconds) per executed cell, matrix order.
    pub cell_ms: Vec<(String, u128)>,
    /// Cover cache activity: (algorithm, "hit"/"miss"/"disabled") plus any
    /// spot-check notes.
    pub cover_cache: Vec<(String, String)>,
}

/// Output encodings for [`emit_report`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Csv,
    Json,
    Markdown,
}

impl ReportFormat {
    pub fn name(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
            ReportFormat::Markdown => "markdown",
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
            ReportFormat::Markdown => "md",
        }
    }
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(Error::validation(format!(
                "unknown report format \"{other}\" (expected csv, json or markdown)"
            ))),
        }
    }
}

/// Renders a metric value for tables: four decimals, or `NA`.
pub fn render_value(value: &MetricValue) -> String {
    match value.value() {
        Some(x) => format!("{x:.4}"),
        None => "NA".into(),
    }
}

/// Writes the report in the chosen format. CSV is the machine interface
/// (stable columns `dataset,task,algorithm,kind,fold,class,metric,value`,
/// full-precision values); JSON re-parses to an equal report; markdown
/// renders one grouped table per task.
pub fn emit_report<W: Write>(
    report: &ExperimentReport,
    format: ReportFormat,
    mut w: W,
) -> Result<()> {
    match format {
        ReportFormat::Csv => emit_csv(report, &mut w),
        ReportFormat::Json => {
            serde_json::to_writer_pretty(&mut w, report)?;
            writeln!(w)?;
            Ok(())
        }
        ReportFormat::Markdown => emit_markdown(report, &mut w),
    }
}

fn emit_csv<W: Write>(report: &ExperimentReport, w: &mut W) -> Result<()> {
    writeln!(w, "dataset,task,algorithm,kind,fold,class,metric,value")?;
    for cell in &report.cells {
        let key = &cell.key;
        if let Some(failure) = &cell.failure {
            // One explicit row so failed cells stay visible to machines;
            // the message itself lives in the JSON report.
            let _ = failure;
            writeln!(
                w,
                "{},{},{},{},,,failed,NA",
                key.dataset, key.task, key.algorithm, key.kind
            )?;
            continue;
        }
        for row in &cell.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                key.dataset,
                key.task,
                key.algorithm,
                key.kind,
                row.fold.map(|f| f.to_string()).unwrap_or_default(),
                row.class.map(|c| c.to_string()).unwrap_or_default(),
                row.metric,
                row.value.render()
            )?;
        }
    }
    Ok(())
}

/// Group label used by the markdown tables.
fn group_of(a: Algorithm) -> &'static str {
    if a == Algorithm::SingleCommunity {
        "Baseline"
    } else if a.is_overlapping() {
        "Overlapping"
    } else {
        "Non-overlapping"
    }
}

/// Cells of one task, reordered into display order: non-overlapping
/// methods, overlapping methods, baseline; configured order within groups.
fn task_cells<'a>(report: &'a ExperimentReport, task: Task) -> Vec<&'a CellResult> {
    let mut cells: Vec<&CellResult> = report
        .cells
        .iter()
        .filter(|c| c.key.task == task)
        .collect();
    let rank = |a: Algorithm| match group_of(a) {
        "Non-overlapping" => 0,
        "Overlapping" => 1,
        _ => 2,
    };
    cells.sort_by_key(|c| rank(c.key.algorithm));
    cells
}

/// The fold-aggregate value of a metric in a cell, if present.
fn aggregate<'a>(cell: &'a CellResult, metric: &str) -> Option<&'a MetricValue> {
    cell.rows
        .iter()
        .find(|r| r.metric == metric && r.fold.is_none() && r.class.is_none())
        .map(|r| &r.value)
}

fn aggregate_cell(cell: &CellResult, metric: &str) -> String {
    match (&cell.failure, aggregate(cell, metric)) {
        (Some(_), _) => "failed".into(),
        (None, Some(v)) => render_value(v),
        (None, None) => "NA".into(),
    }
}

fn emit_markdown<W: Write>(report: &ExperimentReport, w: &mut W) -> Result<()> {
    writeln!(w, "# Experiment report: {}", report.dataset)?;
    writeln!(w)?;
    writeln!(
        w,
        "Master seed {}, config `{}`.",
        report.master_seed, report.config_hash
    )?;

    if !report.covers.is_empty() {
        writeln!(w)?;
        writeln!(w, "## Detected covers")?;
        writeln!(w)?;
        writeln!(w, "| Algorithm | Communities | Min | Median | Max | Overlap | Quality |")?;
        writeln!(w, "|---|---|---|---|---|---|---|")?;
        for c in &report.covers {
            if let Some(failure) = &c.failure {
                writeln!(w, "| {} | failed: {} | | | | | |", c.algorithm, failure)?;
                continue;
            }
            let quality = if c.quality.is_empty() {
                "—".to_string()
            } else {
                c.quality
                    .iter()
                    .map(|r| format!("{} {}", r.metric, render_value(&r.value)))
                    .collect::<Vec<_>>()
                    .join(", ")
            };
            writeln!(
                w,
                "| {} | {} | {} | {} | {} | {:.2} | {} |",
                c.algorithm, c.communities, c.min_size, c.median_size, c.max_size,
                c.overlap_rate, quality
            )?;
        }
    }

    let tasks: Vec<Task> = Task::ALL
        .into_iter()
        .filter(|t| report.cells.iter().any(|c| c.key.task == *t))
        .collect();
    for task in tasks {
        let cells = task_cells(report, task);
        writeln!(w)?;
        match task {
            Task::Recommend => {
                writeln!(w, "## Rating prediction (fold averages)")?;
                writeln!(w)?;
                writeln!(w, "| Group | Algorithm | Propensity | RMSE | MAE |")?;
                writeln!(w, "|---|---|---|---|---|")?;
                let mut last_group = "";
                for cell in cells {
                    let group = group_of(cell.key.algorithm);
                    let shown = if group == last_group { "" } else { group };
                    last_group = group;
                    writeln!(
                        w,
                        "| {} | {} | {} | {} | {} |",
                        shown,
                        cell.key.algorithm,
                        cell.key.kind,
                        aggregate_cell(cell, "rmse"),
                        aggregate_cell(cell, "mae")
                    )?;
                }
            }
            Task::Trust => {
                writeln!(w, "## Trust prediction")?;
                writeln!(w)?;
                writeln!(w, "| Group | Algorithm | Center | AUC | Precision | Recall | F1 |")?;
                writeln!(w, "|---|---|---|---|---|---|---|")?;
                let mut last_group = "";
                for cell in cells {
                    let group = group_of(cell.key.algorithm);
                    let shown = if group == last_group { "" } else { group };
                    last_group = group;
                    writeln!(
                        w,
                        "| {} | {} | {} | {} | {} | {} | {} |",
                        shown,
                        cell.key.algorithm,
                        cell.key.kind,
                        aggregate_cell(cell, "auc"),
                        aggregate_cell(cell, "precision"),
                        aggregate_cell(cell, "recall"),
                        aggregate_cell(cell, "f1")
                    )?;
                }
            }
            Task::Anomaly => {
                writeln!(w, "## Anomaly detection (fold averages)")?;
                for cell in cells {
                    writeln!(w)?;
                    writeln!(
                        w,
                        "### {} ({})",
                        cell.key.algorithm,
                        group_of(cell.key.algorithm)
                    )?;
                    writeln!(w)?;
                    if let Some(failure) = &cell.failure {
                        writeln!(w, "failed: {failure}")?;
                        continue;
                    }
                    writeln!(
                        w,
                        "accuracy {}, AUC {}",
                        aggregate_cell(cell, "accuracy"),
                        aggregate_cell(cell, "auc")
                    )?;
                    writeln!(w)?;
                    writeln!(w, "| Class | Precision | Recall | F1 | Support |")?;
                    writeln!(w, "|---|---|---|---|---|")?;
                    let mut classes: Vec<usize> = cell
                        .rows
                        .iter()
                        .filter_map(|r| r.class)
                        .collect();
                    classes.sort_unstable();
                    classes.dedup();
                    for class in classes {
                        let pick = |metric: &str| {
                            cell.rows
                                .iter()
                                .find(|r| {
                                    r.metric == metric
                                        && r.class == Some(class)
                                        && r.fold.is_none()
                                })
                                .map(|r| render_value(&r.value))
                                .unwrap_or_else(|| "NA".into())
                        };
                        writeln!(
                            w,
                            "| {} | {} | {} | {} | {} |",
                            class,
                            pick("precision"),
                            pick("recall"),
                            pick("f1"),
                            pick("support")
                        )?;
                    }
                }
            }
        }
    }

    let failures: Vec<&CellResult> =
        report.cells.iter().filter(|c| c.failure.is_some()).collect();
    if !failures.is_empty() {
        writeln!(w)?;
        writeln!(w, "## Failed cells")?;
        writeln!(w)?;
        for cell in failures {
            writeln!(
                w,
                "- `{}`: {}",
                cell.key,
                cell.failure.as_deref().unwrap_or("unknown")
            )?;
        }
    }
    Ok(())
}
