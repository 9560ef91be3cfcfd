//! Train/test evaluation of weight schedules and the cross-method comparison table.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::analytics::{compound, mean, portfolio_returns, sample_std, sharpe_ratio, Curve, ReturnTable};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::{simplex_tol, Scalar};

/// Per-date portfolio weights aligned with a return table.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSchedule<T> {
    dates: Vec<NaiveDate>,
    weights: Matrix<T>,
}

impl<T: Scalar> WeightSchedule<T> {
    /// Every row must be long-only and sum to one.
    pub fn new(dates: Vec<NaiveDate>, weights: Matrix<T>) -> Result<Self> {
        if dates.is_empty() {
            return Err(Error::Invalid("weight schedule needs at least one date".into()));
        }
        if weights.nrows() != dates.len() {
            return Err(Error::Dimension(format!(
                "{} weight rows for {} dates",
                weights.nrows(),
                dates.len()
            )));
        }
        for (t, row) in weights.rows_iter().enumerate() {
            check_simplex(row).map_err(|e| Error::InvalidPortfolio(format!("row {t}: {e}")))?;
        }
        Ok(Self { dates, weights })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn weights(&self) -> &Matrix<T> {
        &self.weights
    }

    pub fn row(&self, t: usize) -> &[T] {
        self.weights.row(t)
    }

    pub fn n_assets(&self) -> usize {
        self.weights.ncols()
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    /// Average weight of each asset over the schedule.
    pub fn mean_weights(&self) -> Vec<T> {
        (0..self.n_assets())
            .map(|i| mean(&self.weights.column(i)))
            .collect()
    }
}

/// Long-only, sums to one within the simplex tolerance.
pub(crate) fn check_simplex<T: Scalar>(w: &[T]) -> std::result::Result<(), String> {
    if w.is_empty() {
        return Err("no weights".into());
    }
    if let Some(x) = w.iter().find(|x| !x.is_finite() || **x < T::zero()) {
        return Err(format!("weight {x} is negative or not finite"));
    }
    let sum: T = w.iter().copied().sum();
    if (sum - T::one()).abs() > simplex_tol::<T>() {
        return Err(format!("weights sum to {sum}, not 1"));
    }
    Ok(())
}

/// Repeats one weight vector on every date.
pub fn static_schedule<T: Scalar>(weights: &[T], dates: &[NaiveDate]) -> Result<WeightSchedule<T>> {
    if dates.is_empty() {
        return Err(Error::Invalid("cannot build a schedule over no dates".into()));
    }
    let mut data = Vec::with_capacity(dates.len() * weights.len());
    for _ in dates {
        data.extend_from_slice(weights);
    }
    WeightSchedule::new(dates.to_vec(), Matrix::from_vec(dates.len(), weights.len(), data)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    /// Maximum-Sharpe mean-variance portfolio.
    #[serde(rename = "MVP")]
    Mvp,
    #[serde(rename = "MVP_MIN_RISK")]
    MvpMinRisk,
    #[serde(rename = "HRP")]
    Hrp,
    #[serde(rename = "EQUAL")]
    Equal,
    #[serde(rename = "RL")]
    Rl,
}

impl Method {
    /// Column order of the comparison table.
    pub const TABLE_COLUMNS: [Method; 4] = [Method::Mvp, Method::Hrp, Method::Equal, Method::Rl];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Mvp => "MVP",
            Method::MvpMinRisk => "MVP_MIN_RISK",
            Method::Hrp => "HRP",
            Method::Equal => "EQUAL",
            Method::Rl => "RL",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "MVP" => Ok(Method::Mvp),
            "MVP_MIN_RISK" => Ok(Method::MvpMinRisk),
            "HRP" => Ok(Method::Hrp),
            "EQUAL" => Ok(Method::Equal),
            "RL" => Ok(Method::Rl),
            other => Err(Error::Invalid(format!("unknown method {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Train,
    Test,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Train => "train",
            Phase::Test => "test",
        })
    }
}

/// Annualized risk/return summary of one method on one phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport<T> {
    pub dataset: String,
    pub method: Method,
    pub phase: Phase,
    pub annual_return: T,
    pub risk: T,
    pub risk_free: T,
    pub sharpe: T,
    pub curve: Curve<T>,
}

impl<T: Scalar> BacktestReport<T> {
    /// Recomputes the Sharpe ratio from the stored return, risk and risk-free rate.
    pub fn is_consistent(&self) -> bool {
        self.risk >= T::zero()
            && sharpe_ratio(self.annual_return, self.risk_free, self.risk)
                .map(|s| (s - self.sharpe).abs() <= T::lit(1e-9))
                .unwrap_or(false)
    }
}

/// Identifies a report; the dataset label becomes the comparison-table row.
#[derive(Debug, Clone)]
pub struct ReportLabel<'a> {
    pub dataset: &'a str,
    pub method: Method,
    pub phase: Phase,
}

pub fn run_backtest<T: Scalar>(
    label: ReportLabel<'_>,
    schedule: &WeightSchedule<T>,
    returns: &ReturnTable<T>,
    risk_free: T,
    trading_days: usize,
) -> Result<BacktestReport<T>> {
    let stream = portfolio_returns(returns, schedule)?;
    if stream.len() < 2 {
        return Err(Error::InsufficientData("backtest needs at least 2 return rows".into()));
    }
    let days = T::from_count(trading_days);
    let risk = sample_std(&stream) * days.sqrt();
    let annual_return = mean(&stream) * days;
    let sharpe = sharpe_ratio(annual_return, risk_free, risk)?;
    Ok(BacktestReport {
        dataset: label.dataset.to_string(),
        method: label.method,
        phase: label.phase,
        annual_return,
        risk,
        risk_free,
        sharpe,
        curve: returns.dates().iter().copied().zip(compound(&stream)).collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow<T> {
    pub dataset: String,
    /// Test-phase Sharpe per `Method::TABLE_COLUMNS` entry.
    pub cells: [Option<T>; 4],
}

/// Test-phase Sharpe ratios, one row per dataset, columns MVP, HRP, EQUAL, RL.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable<T> {
    pub rows: Vec<ComparisonRow<T>>,
}

/// Gathers test-phase reports into the comparison table. Rows are sorted by
/// dataset label; methods outside the table columns are ignored.
pub fn compare_methods<T: Scalar>(reports: &[BacktestReport<T>]) -> Result<ComparisonTable<T>> {
    if reports.is_empty() {
        return Err(Error::Invalid("no reports to compare".into()));
    }
    let mut rows: BTreeMap<&str, [Option<T>; 4]> = BTreeMap::new();
    for r in reports.iter().filter(|r| r.phase == Phase::Test) {
        let Some(col) = Method::TABLE_COLUMNS.iter().position(|&m| m == r.method) else {
            continue;
        };
        let cells = rows.entry(r.dataset.as_str()).or_insert([None; 4]);
        if cells[col].is_some() {
            return Err(Error::Invalid(format!(
                "duplicate test report for {} on {}",
                r.method, r.dataset
            )));
        }
        cells[col] = Some(r.sharpe);
    }
    Ok(ComparisonTable {
        rows: rows
            .into_iter()
            .map(|(dataset, cells)| ComparisonRow {
                dataset: dataset.to_string(),
                cells,
            })
            .collect(),
    })
}

impl<T: Scalar> ComparisonTable<T> {
    pub fn header() -> Vec<&'static str> {
        let mut h = vec!["dataset"];
        h.extend(Method::TABLE_COLUMNS.iter().map(|m| m.as_str()));
        h
    }

    /// CSV with header `dataset,MVP,HRP,EQUAL,RL`; missing cells are empty.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        wtr.write_record(Self::header()).map_err(io)?;
        for row in &self.rows {
            let mut rec = vec![row.dataset.clone()];
            rec.extend(row.cells.iter().map(|c| c.map_or_else(String::new, |v| v.to_string())));
            wtr.write_record(&rec).map_err(io)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let header = rdr
            .headers()
            .map_err(|e| Error::Parse { row: 1, message: e.to_string() })?
            .clone();
        if header.iter().collect::<Vec<_>>() != Self::header() {
            return Err(Error::Schema(format!("unexpected comparison header {header:?}")));
        }
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Parse { row: i + 2, message: e.to_string() })?;
            let mut cells = [None; 4];
            for (c, cell) in cells.iter_mut().enumerate() {
                let field = rec.get(c + 1).unwrap_or("").trim();
                if !field.is_empty() {
                    *cell = Some(field.parse().map_err(|_| Error::Parse {
                        row: i + 2,
                        message: format!("bad sharpe {field:?}"),
                    })?);
                }
            }
            rows.push(ComparisonRow {
                dataset: rec.get(0).unwrap_or("").to_string(),
                cells,
            });
        }
        Ok(Self { rows })
    }
}
