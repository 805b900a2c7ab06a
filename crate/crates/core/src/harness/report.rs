use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{MetricRow, Pipeline, Regime};
use crate::error::{Error, Result};
use crate::metrics::MetricName;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation (n - 1); 0 for a single value.
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Stat> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n == 1 {
            0.0
        } else {
            let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
            (ss / (n - 1) as f64).sqrt()
        };
        Some(Stat { mean, std })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub regime: Regime,
    pub pipeline: Pipeline,
    pub count: usize,
    /// Indexed like [`MetricName::ALL`].
    pub stats: [Stat; 4],
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportTable {
    pub cells: Vec<CellStats>,
}

/// Mean and sample std per (regime, pipeline), in canonical order. Empty
/// combinations are left out.
pub fn aggregate(rows: &[MetricRow]) -> ReportTable {
    let mut cells = Vec::new();
    for regime in Regime::ALL {
        for pipeline in Pipeline::ALL {
            let group: Vec<&MetricRow> = rows
                .iter()
                .filter(|r| r.regime == regime && r.pipeline == pipeline)
                .collect();
            if group.is_empty() {
                continue;
            }
            let stats = std::array::from_fn(|i| {
                let values: Vec<f64> = group.iter().map(|r| r.values[i]).collect();
                Stat::of(&values).expect("non-empty group")
            });
            cells.push(CellStats {
                regime,
                pipeline,
                count: group.len(),
                stats,
            });
        }
    }
    if cells.is_empty() {
        log::warn!("no rows to aggregate");
    }
    ReportTable { cells }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(Error::invalid(format!("unknown report format `{other}`"))),
        }
    }
}

fn arrow(name: MetricName) -> &'static str {
    match name.direction() {
        crate::metrics::Direction::LowerBetter => "↓",
        crate::metrics::Direction::HigherBetter => "↑",
    }
}

pub fn render_report(table: &ReportTable, format: ReportFormat) -> String {
    let mut out = String::new();
    match format {
        ReportFormat::Csv => {
            out.push_str("regime,pipeline,clips");
            for name in MetricName::ALL {
                write!(out, ",{name}_mean,{name}_std").unwrap();
            }
            out.push_str("\r\n");
            for cell in &table.cells {
                write!(out, "{},{},{}", cell.regime, cell.pipeline, cell.count).unwrap();
                for s in &cell.stats {
                    write!(out, ",{:.6},{:.6}", s.mean, s.std).unwrap();
                }
                out.push_str("\r\n");
            }
        }
        ReportFormat::Markdown => {
            out.push_str("| Regime | Pipeline | Clips |");
            for name in MetricName::ALL {
                let group = match name {
                    MetricName::KlDiv | MetricName::Cc => "fixation",
                    MetricName::FBeta | MetricName::Mae => "semantic",
                };
                write!(out, " {name} {} ({group}) |", arrow(name)).unwrap();
            }
            out.push_str("\n|---|---|---:|---:|---:|---:|---:|\n");
            for cell in &table.cells {
                write!(
                    out,
                    "| {} | {} | {} |",
                    cell.regime, cell.pipeline, cell.count
                )
                .unwrap();
                for s in &cell.stats {
                    write!(out, " {:.4} ± {:.4} |", s.mean, s.std).unwrap();
                }
                out.push('\n');
            }
            out.push_str(
                "\nFixation-centric metrics (D_KL, CC) are scored against each regime's own \
                 ground truth; semantic-centric metrics (F1, MAE) against the segmentation mask.\n\
                 Cells are mean ± sample standard deviation (n-1) over clip-level scores; \
                 each clip score is the mean over its frames.\n",
            );
        }
    }
    out
}

pub fn emit_report(
    table: &ReportTable,
    format: ReportFormat,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, render_report(table, format)).map_err(|e| Error::io(path, e))
}
