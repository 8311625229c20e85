//! `CMCF1` snapshot files: a one-line text header followed by the node values
//! as little-endian `f64`, row-major with the last axis fastest.
//!
//! ```text
//! CMCF1 n=3 dims=33,33,33 h=0.125,0.125,0.125 origin=-2.0,-2.0,-2.0 t=0.1 far=0.0
//! ```
//!
//! A trailing `bc=F,L,…` token records per-axis padding when any axis is not
//! far-field padded. Floats are written in shortest round-trip form, so
//! write-then-read is bit-exact.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::grid::{AxisBoundary, Grid, GridError, ScalarField};

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("malformed header: {0}")]
    Header(String),
    #[error("payload has {got} bytes, expected {expected}")]
    Payload { expected: usize, got: usize },
    #[error(transparent)]
    Grid(#[from] GridError),
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",")
}

pub fn header(field: &ScalarField) -> String {
    let g = &field.grid;
    let dims = g.dims().iter().map(|d| d.to_string()).collect::<Vec<_>>().join(",");
    let mut s = format!(
        "CMCF1 n={} dims={} h={} origin={} t={:?} far={:?}",
        g.dim(),
        dims,
        join(g.spacing()),
        join(g.origin()),
        field.time,
        field.far_field
    );
    if field.boundary.iter().any(|b| *b != AxisBoundary::FarField) {
        let bc: Vec<String> = field.boundary.iter().map(|b| b.code().to_string()).collect();
        s.push_str(" bc=");
        s.push_str(&bc.join(","));
    }
    s
}

pub fn write_to<W: Write>(field: &ScalarField, mut w: W) -> io::Result<()> {
    writeln!(w, "{}", header(field))?;
    let mut buf = Vec::with_capacity(field.values.len() * 8);
    for v in &field.values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)
}

pub fn to_bytes(field: &ScalarField) -> Vec<u8> {
    let mut out = Vec::new();
    write_to(field, &mut out).expect("writing to memory");
    out
}

pub fn write(field: &ScalarField, path: &Path) -> Result<(), SnapshotError> {
    fs::write(path, to_bytes(field))?;
    Ok(())
}

fn parse_list<T: std::str::FromStr>(key: &str, s: &str) -> Result<Vec<T>, SnapshotError> {
    s.split(',')
        .map(|p| {
            p.parse::<T>()
                .map_err(|_| SnapshotError::Header(format!("bad value `{p}` for {key}")))
        })
        .collect()
}

pub fn from_bytes(bytes: &[u8]) -> Result<ScalarField, SnapshotError> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| SnapshotError::Header("missing newline".into()))?;
    let head = std::str::from_utf8(&bytes[..nl])
        .map_err(|_| SnapshotError::Header("header is not utf-8".into()))?;
    let mut tokens = head.split_whitespace();
    if tokens.next() != Some("CMCF1") {
        return Err(SnapshotError::Header("missing CMCF1 tag".into()));
    }
    let (mut n, mut dims, mut h, mut origin, mut t, mut far, mut bc) =
        (None, None, None, None, None, None, None);
    for tok in tokens {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| SnapshotError::Header(format!("token `{tok}` is not key=value")))?;
        match k {
            "n" => n = Some(parse_list::<usize>(k, v)?[0]),
            "dims" => dims = Some(parse_list::<usize>(k, v)?),
            "h" => h = Some(parse_list::<f64>(k, v)?),
            "origin" => origin = Some(parse_list::<f64>(k, v)?),
            "t" => t = Some(parse_list::<f64>(k, v)?[0]),
            "far" => far = Some(parse_list::<f64>(k, v)?[0]),
            "bc" => {
                let codes: Option<Vec<AxisBoundary>> = v
                    .split(',')
                    .map(|c| c.chars().next().and_then(AxisBoundary::from_code))
                    .collect();
                bc = Some(codes.ok_or_else(|| SnapshotError::Header(format!("bad bc `{v}`")))?);
            }
            _ => return Err(SnapshotError::Header(format!("unknown key `{k}`"))),
        }
    }
    let missing = |k: &str| SnapshotError::Header(format!("missing `{k}`"));
    let n = n.ok_or_else(|| missing("n"))?;
    let dims = dims.ok_or_else(|| missing("dims"))?;
    if dims.len() != n {
        return Err(SnapshotError::Header(format!("n={n} but {} dims", dims.len())));
    }
    let grid = Grid::new(
        dims,
        h.ok_or_else(|| missing("h"))?,
        origin.ok_or_else(|| missing("origin"))?,
    )?;
    let payload = &bytes[nl + 1..];
    let expected = grid.len() * 8;
    if payload.len() != expected {
        return Err(SnapshotError::Payload {
            expected,
            got: payload.len(),
        });
    }
    let values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let mut field = ScalarField::new(grid, values, far.ok_or_else(|| missing("far"))?)?
        .with_time(t.ok_or_else(|| missing("t"))?);
    if let Some(bc) = bc {
        if bc.len() != n {
            return Err(SnapshotError::Header("bc length differs from n".into()));
        }
        field = field.with_boundary(bc);
    }
    Ok(field)
}

pub fn read(path: &Path) -> Result<ScalarField, SnapshotError> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    from_bytes(&bytes)
}
