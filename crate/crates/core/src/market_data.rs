//! Close-price tables: CSV ingestion, gap filling and date splits.
//!
//! The on-disk format is a plain CSV with a `date` column followed by one
//! column per ticker:
//!
//! ```text
//! date,AAA,BBB
//! 2019-01-02,101.5,33.2
//! 2019-01-03,,33.9
//! ```
//!
//! Empty fields are missing values. Anything else that does not parse as a
//! positive finite number is rejected.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const DATE_FORMAT: &str = "%Y-%m-%d";

/// Dated close-price matrix, rows are trading days and columns tickers.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceTable<T> {
    dates: Vec<NaiveDate>,
    tickers: Vec<String>,
    // row-major, `None` marks a missing close
    closes: Vec<Option<T>>,
}

impl<T: Scalar> PriceTable<T> {
    /// Builds a table from rows of closes. Dates must be strictly increasing
    /// and every present close finite and positive.
    pub fn new(dates: Vec<NaiveDate>, tickers: Vec<String>, rows: Vec<Vec<Option<T>>>) -> Result<Self> {
        if tickers.len() < 2 {
            return Err(Error::Schema(format!(
                "need at least 2 ticker columns, found {}",
                tickers.len()
            )));
        }
        if rows.len() != dates.len() {
            return Err(Error::Dimension(format!(
                "{} dates for {} rows",
                dates.len(),
                rows.len()
            )));
        }
        for (i, pair) in dates.windows(2).enumerate() {
            if pair[1] <= pair[0] {
                return Err(Error::Order {
                    row: i + 1,
                    date: pair[1],
                    previous: pair[0],
                });
            }
        }
        let mut closes = Vec::with_capacity(rows.len() * tickers.len());
        for (r, row) in rows.into_iter().enumerate() {
            if row.len() != tickers.len() {
                return Err(Error::Dimension(format!(
                    "row {r} has {} closes for {} tickers",
                    row.len(),
                    tickers.len()
                )));
            }
            for x in row.iter().flatten() {
                if !x.is_finite() || *x <= T::zero() {
                    return Err(Error::Parse {
                        row: r,
                        message: format!("close {x} is not a positive finite number"),
                    });
                }
            }
            closes.extend(row);
        }
        Ok(Self {
            dates,
            tickers,
            closes,
        })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn n_rows(&self) -> usize {
        self.dates.len()
    }

    pub fn n_assets(&self) -> usize {
        self.tickers.len()
    }

    #[inline]
    pub fn close(&self, row: usize, asset: usize) -> Option<T> {
        self.closes[row * self.tickers.len() + asset]
    }

    pub fn row(&self, row: usize) -> &[Option<T>] {
        let n = self.tickers.len();
        &self.closes[row * n..(row + 1) * n]
    }

    pub fn missing_count(&self) -> usize {
        self.closes.iter().filter(|c| c.is_none()).count()
    }

    pub fn is_complete(&self) -> bool {
        self.missing_count() == 0
    }

    /// Close at `(row, asset)`, failing on a missing cell.
    pub fn require(&self, row: usize, asset: usize) -> Result<T> {
        self.close(row, asset).ok_or_else(|| Error::MissingValue {
            ticker: self.tickers[asset].clone(),
            date: self.dates[row],
        })
    }

    fn slice_rows(&self, start: usize, end: usize) -> Self {
        let n = self.tickers.len();
        Self {
            dates: self.dates[start..end].to_vec(),
            tickers: self.tickers.clone(),
            closes: self.closes[start * n..end * n].to_vec(),
        }
    }

    /// Keeps only the listed ticker columns, in the given order.
    pub fn select_tickers(&self, names: &[&str]) -> Result<Self> {
        let idx = names
            .iter()
            .map(|name| {
                self.tickers
                    .iter()
                    .position(|t| t == name)
                    .ok_or_else(|| Error::Schema(format!("unknown ticker {name}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let rows = (0..self.n_rows())
            .map(|r| idx.iter().map(|&i| self.close(r, i)).collect())
            .collect();
        Self::new(
            self.dates.clone(),
            names.iter().map(|s| s.to_string()).collect(),
            rows,
        )
    }
}

/// Train/test boundary: the train partition ends on `train_end` inclusive,
/// the test partition starts on `test_start` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateSplit {
    pub train_end: NaiveDate,
    pub test_start: NaiveDate,
}

impl DateSplit {
    pub fn new(train_end: NaiveDate, test_start: NaiveDate) -> Result<Self> {
        if train_end >= test_start {
            return Err(Error::Split(format!(
                "train_end {train_end} must precede test_start {test_start}"
            )));
        }
        Ok(Self {
            train_end,
            test_start,
        })
    }
}

pub fn load_prices<T: Scalar>(path: impl AsRef<Path>) -> Result<PriceTable<T>> {
    let file = File::open(path.as_ref())?;
    read_prices(file)
}

/// Parses a close-price CSV. At least three rows and two tickers are required.
pub fn read_prices<T: Scalar, R: Read>(reader: R) -> Result<PriceTable<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);

    let header = rdr.headers().map_err(|e| Error::Parse {
        row: 1,
        message: e.to_string(),
    })?;
    let mut cols = header.iter().map(str::trim);
    match cols.next() {
        Some(first) if first.eq_ignore_ascii_case("date") => {}
        other => {
            return Err(Error::Schema(format!(
                "first column must be `date`, found {:?}",
                other.unwrap_or("")
            )))
        }
    }
    let tickers: Vec<String> = cols.map(str::to_owned).collect();
    if tickers.len() < 2 {
        return Err(Error::Schema(format!(
            "need at least 2 ticker columns, found {}",
            tickers.len()
        )));
    }
    for (i, t) in tickers.iter().enumerate() {
        if t.is_empty() {
            return Err(Error::Schema(format!("ticker column {} has an empty name", i + 1)));
        }
        if tickers[..i].contains(t) {
            return Err(Error::Schema(format!("duplicate ticker {t}")));
        }
    }

    let mut dates: Vec<NaiveDate> = Vec::new();
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Parse {
            row: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != tickers.len() + 1 {
            return Err(Error::Parse {
                row: line,
                message: format!("expected {} fields, found {}", tickers.len() + 1, record.len()),
            });
        }
        let raw_date = record[0].trim();
        let date = NaiveDate::parse_from_str(raw_date, DATE_FORMAT).map_err(|e| Error::Parse {
            row: line,
            message: format!("bad date {raw_date:?}: {e}"),
        })?;
        if let Some(&previous) = dates.last() {
            if date <= previous {
                return Err(Error::Order {
                    row: line,
                    date,
                    previous,
                });
            }
        }
        let mut row = Vec::with_capacity(tickers.len());
        for (field, ticker) in record.iter().skip(1).zip(&tickers) {
            let field = field.trim();
            if field.is_empty() {
                row.push(None);
                continue;
            }
            let value: T = field.parse().map_err(|_| Error::Parse {
                row: line,
                message: format!("bad close {field:?} for {ticker}"),
            })?;
            if !value.is_finite() || value <= T::zero() {
                return Err(Error::Parse {
                    row: line,
                    message: format!("close {field:?} for {ticker} is not a positive finite number"),
                });
            }
            row.push(Some(value));
        }
        dates.push(date);
        rows.push(row);
    }
    if rows.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "price table needs at least 3 rows, found {}",
            rows.len()
        )));
    }
    PriceTable::new(dates, tickers, rows)
}

/// Writes the table in the same CSV layout `read_prices` accepts, LF line
/// endings, missing cells as empty fields.
pub fn write_prices<T: Scalar, W: Write>(table: &PriceTable<T>, writer: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    let mut header = vec!["date".to_string()];
    header.extend(table.tickers.iter().cloned());
    wtr.write_record(&header).map_err(csv_io)?;
    for r in 0..table.n_rows() {
        let mut rec = Vec::with_capacity(table.n_assets() + 1);
        rec.push(table.dates[r].format(DATE_FORMAT).to_string());
        rec.extend(
            table
                .row(r)
                .iter()
                .map(|c| c.map_or_else(String::new, |v| v.to_string())),
        );
        wtr.write_record(&rec).map_err(csv_io)?;
    }
    wtr.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Replaces every missing close with the latest earlier close of the same ticker.
pub fn forward_fill<T: Scalar>(table: &PriceTable<T>) -> Result<PriceTable<T>> {
    let n = table.n_assets();
    if table.n_rows() == 0 {
        return Ok(table.clone());
    }
    if let Some(i) = table.row(0).iter().position(Option::is_none) {
        return Err(Error::Unfillable {
            ticker: table.tickers[i].clone(),
        });
    }
    let mut closes = table.closes.clone();
    for idx in n..closes.len() {
        if closes[idx].is_none() {
            closes[idx] = closes[idx - n];
        }
    }
    Ok(PriceTable {
        dates: table.dates.clone(),
        tickers: table.tickers.clone(),
        closes,
    })
}

/// Splits into (train, test) partitions on the given dates.
pub fn split_by_date<T: Scalar>(
    table: &PriceTable<T>,
    split: DateSplit,
) -> Result<(PriceTable<T>, PriceTable<T>)> {
    let (first, last) = match (table.dates.first(), table.dates.last()) {
        (Some(&f), Some(&l)) => (f, l),
        _ => return Err(Error::Split("empty table".into())),
    };
    if split.train_end < first || split.test_start > last {
        return Err(Error::Split(format!(
            "split {} / {} outside table range {first}..{last}",
            split.train_end, split.test_start
        )));
    }
    if split.train_end >= split.test_start {
        return Err(Error::Split("train_end must precede test_start".into()));
    }
    let train_len = table.dates.partition_point(|d| *d <= split.train_end);
    let test_from = table.dates.partition_point(|d| *d < split.test_start);
    if train_len == 0 || test_from == table.n_rows() {
        return Err(Error::Split("split leaves an empty partition".into()));
    }
    Ok((
        table.slice_rows(0, train_len),
        table.slice_rows(test_from, table.n_rows()),
    ))
}
