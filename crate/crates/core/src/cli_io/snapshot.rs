//! Binary field snapshots.
//!
//! Layout: a 64-byte ASCII header `OLLG1\n<n_side> <length> <time>` padded
//! with spaces and closed by `\n`, then the node vectors as little-endian
//! `f64` triples in row-major order, then the wrapping sum of the payload
//! bytes as a little-endian `u64`.

use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, VectorField3};

const MAGIC: &str = "OLLG1\n";
pub const HEADER_LEN: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub field: VectorField3,
}

fn checksum(payload: &[u8]) -> u64 {
    payload.iter().fold(0u64, |s, &b| s.wrapping_add(b as u64))
}

pub fn encode(time: f64, field: &VectorField3) -> Vec<u8> {
    let grid = field.grid();
    let mut header = format!("{MAGIC}{} {} {}", grid.n_side(), grid.length(), time);
    assert!(header.len() < HEADER_LEN, "snapshot header overflow");
    while header.len() < HEADER_LEN - 1 {
        header.push(' ');
    }
    header.push('\n');
    let mut out = Vec::with_capacity(HEADER_LEN + 24 * grid.len() + 8);
    out.extend_from_slice(header.as_bytes());
    for v in field.values() {
        for c in v {
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
    let sum = checksum(&out[HEADER_LEN..]);
    out.extend_from_slice(&sum.to_le_bytes());
    out
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<Snapshot> {
    let fail = |message: String| Error::Snapshot {
        path: path.to_path_buf(),
        message,
    };
    if bytes.len() < HEADER_LEN + 8 {
        return Err(fail(format!("file is {} bytes, shorter than header and checksum", bytes.len())));
    }
    let header = std::str::from_utf8(&bytes[..HEADER_LEN]).map_err(|_| fail("header is not ASCII".into()))?;
    let body = header
        .strip_prefix(MAGIC)
        .ok_or_else(|| fail("bad magic".into()))?;
    let parts: Vec<&str> = body.split_whitespace().collect();
    if parts.len() != 3 || !header.ends_with('\n') {
        return Err(fail(format!("malformed header `{}`", header.trim_end())));
    }
    let n_side: usize = parts[0].parse().map_err(|_| fail(format!("bad n_side `{}`", parts[0])))?;
    let length: f64 = parts[1].parse().map_err(|_| fail(format!("bad length `{}`", parts[1])))?;
    let time: f64 = parts[2].parse().map_err(|_| fail(format!("bad time `{}`", parts[2])))?;
    let grid = GridSpec::new(n_side, length).map_err(|e| fail(e.to_string()))?;
    let expected = HEADER_LEN + 24 * grid.len() + 8;
    if bytes.len() != expected {
        return Err(fail(format!("expected {expected} bytes for N = {n_side}, found {}", bytes.len())));
    }
    let payload = &bytes[HEADER_LEN..expected - 8];
    let stored = u64::from_le_bytes(bytes[expected - 8..].try_into().expect("8 bytes"));
    let computed = checksum(payload);
    if stored != computed {
        return Err(Error::Checksum {
            path: path.to_path_buf(),
            stored,
            computed,
        });
    }
    let values = payload
        .chunks_exact(24)
        .map(|c| {
            let f = |i: usize| f64::from_le_bytes(c[8 * i..8 * i + 8].try_into().expect("8 bytes"));
            [f(0), f(1), f(2)]
        })
        .collect();
    Ok(Snapshot {
        time,
        field: VectorField3::from_values(grid, values)?,
    })
}

pub fn write_snapshot(path: &Path, time: f64, field: &VectorField3) -> Result<()> {
    std::fs::write(path, encode(time, field))?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    decode(&std::fs::read(path)?, path)
}
