//! Sample trace files.
//!
//! Text: a header of comma-separated labels, then one line of `p`
//! comma-separated `0`/`1` digits per kept draw.
//!
//! Binary: the magic bytes `CCS1`, little-endian `u32` N and `u32` p, then
//! `⌈p/8⌉` bytes per row, LSB-first within each byte. Binary files carry no
//! labels; reading one yields the default labels `x1..xp`.

use std::path::Path;

use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::model::{default_labels, Model, SampleTrace};

pub const MAGIC: &[u8; 4] = b"CCS1";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TraceFormat {
    #[default]
    Text,
    Binary,
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

/// Parses the text format.
pub fn parse_text(text: &str) -> Result<SampleTrace> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)));
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty trace file"))?;
    let labels: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    if labels.iter().any(|l| l.is_empty()) {
        return Err(parse_err(1, "empty variable label"));
    }
    let p = labels.len();
    let mut models = Vec::new();
    for (line, row) in lines {
        if row.trim().is_empty() {
            continue;
        }
        let mut m = Model::zeros(p);
        let mut col = 0;
        for field in row.split(',') {
            if col == p {
                return Err(parse_err(line, format!("more than {p} columns")));
            }
            match field.trim() {
                "0" => {}
                "1" => m.set(col, true),
                other => return Err(parse_err(line, format!("non-binary entry {other:?} in column {}", col + 1))),
            }
            col += 1;
        }
        if col != p {
            return Err(parse_err(line, format!("{col} columns but the header has {p} labels")));
        }
        models.push(m);
    }
    if models.is_empty() {
        return Err(parse_err(1, "trace has no samples"));
    }
    SampleTrace::new(labels, models).map_err(|e| parse_err(1, e.to_string()))
}

/// Parses the binary format.
pub fn parse_binary(bytes: &[u8]) -> Result<SampleTrace> {
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        return Err(parse_err(0, "missing CCS1 header"));
    }
    let n = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let p = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let row_bytes = p.div_ceil(8);
    let body = &bytes[12..];
    if body.len() != n * row_bytes {
        return Err(parse_err(0, format!("expected {} bytes of rows for N = {n}, p = {p}, found {}", n * row_bytes, body.len())));
    }
    if n == 0 {
        return Err(parse_err(0, "trace has no samples"));
    }
    let models = body
        .chunks_exact(row_bytes.max(1))
        .take(n)
        .enumerate()
        .map(|(r, row)| {
            let mut m = Model::zeros(p);
            for (i, byte) in row.iter().enumerate() {
                for bit in 0..8 {
                    if byte >> bit & 1 == 1 {
                        let col = i * 8 + bit;
                        if col >= p {
                            return Err(parse_err(r + 1, "padding bits must be zero"));
                        }
                        m.set(col, true);
                    }
                }
            }
            Ok(m)
        })
        .collect::<Result<Vec<_>>>()?;
    SampleTrace::new(default_labels(p), models)
}

/// Reads a trace, detecting the binary format by its magic bytes.
pub fn read_trace(path: &Path) -> Result<SampleTrace> {
    let bytes = std::fs::read(path)?;
    if bytes.starts_with(MAGIC) {
        parse_binary(&bytes)
    } else {
        let text = std::str::from_utf8(&bytes).map_err(|e| parse_err(0, format!("not UTF-8: {e}")))?;
        parse_text(text)
    }
}

pub fn to_text(trace: &SampleTrace) -> String {
    let p = trace.n_vars();
    let mut out = String::with_capacity((trace.n_samples() + 1) * (2 * p + 1));
    out.push_str(&trace.labels().join(","));
    out.push('\n');
    for m in trace.models() {
        for (i, b) in m.bits().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push(if b { '1' } else { '0' });
        }
        out.push('\n');
    }
    out
}

pub fn to_binary(trace: &SampleTrace) -> Result<Vec<u8>> {
    let n = u32::try_from(trace.n_samples()).map_err(|_| crate::error::invalid("too many samples for the binary format"))?;
    let p = u32::try_from(trace.n_vars()).map_err(|_| crate::error::invalid("too many variables for the binary format"))?;
    let row_bytes = trace.n_vars().div_ceil(8);
    let mut out = Vec::with_capacity(12 + trace.n_samples() * row_bytes);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&n.to_le_bytes());
    out.extend_from_slice(&p.to_le_bytes());
    for m in trace.models() {
        let mut row = vec![0u8; row_bytes];
        for i in m.ones() {
            row[i / 8] |= 1 << (i % 8);
        }
        out.extend_from_slice(&row);
    }
    Ok(out)
}

pub fn write_trace(trace: &SampleTrace, path: &Path, format: TraceFormat) -> Result<()> {
    match format {
        TraceFormat::Text => write_atomic(path, to_text(trace).as_bytes()),
        TraceFormat::Binary => write_atomic(path, &to_binary(trace)?),
    }
}
