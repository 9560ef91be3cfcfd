//! Plain-text network format:
//!
//! ```text
//! qnet 1
//! dims 55 64 32 21
//! <one parameter per line, layer by layer: weights row-major, then bias>
//! ```
//!
//! Values are written with the shortest representation that parses back to
//! the same float, so save then load is exact.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::network::QNetwork;

const MAGIC: &str = "qnet 1";

pub fn write_model<T: Scalar, W: Write>(net: &QNetwork<T>, mut w: W) -> Result<()> {
    writeln!(w, "{MAGIC}")?;
    let dims: Vec<String> = net.dims().iter().map(usize::to_string).collect();
    writeln!(w, "dims {}", dims.join(" "))?;
    for p in net.params() {
        writeln!(w, "{p}")?;
    }
    w.flush()?;
    Ok(())
}

fn model_err(line: usize, message: impl Into<String>) -> Error {
    Error::Model {
        line,
        message: message.into(),
    }
}

pub fn read_model<T: Scalar, R: Read>(r: R) -> Result<QNetwork<T>> {
    let mut lines = BufReader::new(r).lines();
    let mut next = |n: usize| -> Result<Option<String>> { lines.next().transpose().map_err(|e| model_err(n, e.to_string())) };

    if next(1)?.as_deref() != Some(MAGIC) {
        return Err(model_err(1, format!("expected header {MAGIC:?}")));
    }
    let dims_line = next(2)?.ok_or_else(|| model_err(2, "missing dims line"))?;
    let dims: Vec<usize> = dims_line
        .strip_prefix("dims ")
        .ok_or_else(|| model_err(2, "expected `dims ...`"))?
        .split_whitespace()
        .map(|d| d.parse().map_err(|_| model_err(2, format!("bad dimension {d:?}"))))
        .collect::<Result<_>>()?;
    if dims.len() < 2 || dims.contains(&0) {
        return Err(model_err(2, "need at least two positive dimensions"));
    }

    let mut net = QNetwork::zeros(&dims);
    let count = net.param_count();
    let mut params = Vec::with_capacity(count);
    for i in 0..count {
        let line_no = i + 3;
        let text = next(line_no)?.ok_or_else(|| model_err(line_no, format!("expected {count} parameters, found {i}")))?;
        let v: T = text
            .trim()
            .parse()
            .map_err(|_| model_err(line_no, format!("bad parameter {text:?}")))?;
        if !v.is_finite() {
            return Err(model_err(line_no, "non-finite parameter"));
        }
        params.push(v);
    }
    let mut extra = count + 3;
    while let Some(text) = next(extra)? {
        if !text.trim().is_empty() {
            return Err(model_err(extra, "trailing data after parameters"));
        }
        extra += 1;
    }
    net.set_params(&params)?;
    Ok(net)
}

pub fn save_model<T: Scalar>(net: &QNetwork<T>, path: impl AsRef<Path>) -> Result<()> {
    write_model(net, BufWriter::new(File::create(path)?))
}

pub fn load_model<T: Scalar>(path: impl AsRef<Path>) -> Result<QNetwork<T>> {
    read_model(File::open(path)?)
}
