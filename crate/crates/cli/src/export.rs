//! File formats written by the commands, each with a reader so every output
//! can be parsed back.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use plab_core::hrp::MergeRecord;
use plab_core::{BacktestReport, FrontierPoint, LinkageTree};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Static allocation of one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsEntry {
    pub method: String,
    pub tickers: Vec<String>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatedWeights {
    pub date: NaiveDate,
    pub weights: Vec<f64>,
}

/// Time-varying allocation, one row per return date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub method: String,
    pub phase: String,
    pub tickers: Vec<String>,
    pub schedule: Vec<DatedWeights>,
}

impl ScheduleEntry {
    pub fn mean_weights(&self) -> Vec<f64> {
        let n = self.tickers.len();
        let mut acc = vec![0.0; n];
        for row in &self.schedule {
            for (a, w) in acc.iter_mut().zip(&row.weights) {
                *a += w;
            }
        }
        let len = self.schedule.len().max(1) as f64;
        acc.into_iter().map(|a| a / len).collect()
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<PathBuf, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(path.to_path_buf())
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<PathBuf, CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<D: DeserializeOwned>(path: &Path) -> Result<D, CliError> {
    serde_json::from_str(&read_text(path)?).map_err(|e| CliError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn read_reports(path: &Path) -> Result<Vec<BacktestReport>, CliError> {
    let reports: Vec<BacktestReport> = read_json(path)?;
    if let Some(bad) = reports.iter().find(|r| !r.is_consistent()) {
        return Err(CliError::Format {
            path: path.to_path_buf(),
            message: format!("{} {} report is internally inconsistent", bad.method, bad.phase),
        });
    }
    Ok(reports)
}

/// CSV `volatility,return,sharpe,w1..wN`, one row per point.
pub fn frontier_csv(points: &[FrontierPoint]) -> String {
    let n = points.first().map_or(0, |p| p.weights.len());
    let mut out = String::from("volatility,return,sharpe");
    for i in 1..=n {
        let _ = write!(out, ",w{i}");
    }
    out.push('\n');
    for p in points {
        let _ = write!(out, "{},{},{}", p.annual_volatility, p.annual_return, p.sharpe);
        for w in &p.weights {
            let _ = write!(out, ",{w}");
        }
        out.push('\n');
    }
    out
}

fn format_err(what: &str, line: usize, message: impl std::fmt::Display) -> CliError {
    CliError::Format {
        path: PathBuf::from(what),
        message: format!("line {line}: {message}"),
    }
}

fn parse_fields(what: &str, line_no: usize, line: &str) -> Result<Vec<f64>, CliError> {
    line.split(',')
        .map(|f| f.parse::<f64>().map_err(|_| format_err(what, line_no, format!("bad number {f:?}"))))
        .collect()
}

pub fn parse_frontier_csv(text: &str) -> Result<Vec<FrontierPoint>, CliError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| format_err("frontier", 1, "empty file"))?;
    let cols: Vec<&str> = header.split(',').collect();
    let n = cols.len().saturating_sub(3);
    let expected: Vec<String> = ["volatility", "return", "sharpe"]
        .iter()
        .map(|s| s.to_string())
        .chain((1..=n).map(|i| format!("w{i}")))
        .collect();
    if cols != expected {
        return Err(format_err("frontier", 1, format!("unexpected header {header:?}")));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let v = parse_fields("frontier", i + 2, line)?;
            if v.len() != n + 3 {
                return Err(format_err("frontier", i + 2, "wrong field count"));
            }
            Ok(FrontierPoint {
                annual_volatility: v[0],
                annual_return: v[1],
                sharpe: v[2],
                weights: v[3..].to_vec(),
            })
        })
        .collect()
}

/// Linkage as a JSON list of merge records in merge order.
pub fn linkage_from_records(records: Vec<MergeRecord<f64>>) -> Result<LinkageTree, CliError> {
    let tree = LinkageTree {
        n_leaves: records.len() + 1,
        merges: records,
    };
    tree.validate()?;
    Ok(tree)
}

/// CSV `ticker,weight` in the given row order.
pub fn weight_bars_csv(tickers: &[String], weights: &[f64], order: &[usize]) -> String {
    let mut out = String::from("ticker,weight\n");
    for &i in order {
        let _ = writeln!(out, "{},{}", tickers[i], weights[i]);
    }
    out
}

pub fn parse_weight_bars_csv(text: &str) -> Result<Vec<(String, f64)>, CliError> {
    let mut lines = text.lines();
    if lines.next() != Some("ticker,weight") {
        return Err(format_err("weight bars", 1, "expected header ticker,weight"));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let (t, w) = line
                .rsplit_once(',')
                .ok_or_else(|| format_err("weight bars", i + 2, "missing comma"))?;
            let w = w
                .parse()
                .map_err(|_| format_err("weight bars", i + 2, format!("bad weight {w:?}")))?;
            Ok((t.to_string(), w))
        })
        .collect()
}

/// CSV `date,<label>...` of aligned cumulative-return curves.
pub fn curves_csv(labels: &[&str], dates: &[NaiveDate], curves: &[Vec<f64>]) -> String {
    let mut out = String::from("date");
    for l in labels {
        let _ = write!(out, ",{l}");
    }
    out.push('\n');
    for (t, d) in dates.iter().enumerate() {
        let _ = write!(out, "{d}");
        for c in curves {
            let _ = write!(out, ",{}", c[t]);
        }
        out.push('\n');
    }
    out
}

/// Labels, dates and one column per label.
pub type Curves = (Vec<String>, Vec<NaiveDate>, Vec<Vec<f64>>);

/// Inverse of [`curves_csv`].
pub fn parse_curves_csv(text: &str) -> Result<Curves, CliError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| format_err("curves", 1, "empty file"))?;
    let mut cols = header.split(',');
    if cols.next() != Some("date") {
        return Err(format_err("curves", 1, "first column must be date"));
    }
    let labels: Vec<String> = cols.map(str::to_string).collect();
    let mut dates = Vec::new();
    let mut curves = vec![Vec::new(); labels.len()];
    for (i, line) in lines.enumerate() {
        let (d, rest) = line
            .split_once(',')
            .ok_or_else(|| format_err("curves", i + 2, "missing values"))?;
        dates.push(
            NaiveDate::parse_from_str(d, "%Y-%m-%d").map_err(|e| format_err("curves", i + 2, e))?,
        );
        let v = parse_fields("curves", i + 2, rest)?;
        if v.len() != labels.len() {
            return Err(format_err("curves", i + 2, "wrong field count"));
        }
        for (c, x) in curves.iter_mut().zip(v) {
            c.push(x);
        }
    }
    Ok((labels, dates, curves))
}
