//! File formats: binary field files, trace CSV and digests.
//!
//! A field file is one line of JSON (the header) terminated by `\n`, followed
//! by the nodal values as little-endian `f64` in row-major order (last axis
//! fastest). The header records the shape, boundary class and domain.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::sync::Arc;

use ndarray::Array3;
use sbp_core::solver::TraceRow;
use sbp_core::{BoundaryClass, Grid, ScalarField};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const FIELD_FORMAT: &str = "sbp-field";
pub const FIELD_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Os { path: String, source: std::io::Error },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

fn os(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Os { path: path.display().to_string(), source }
}

fn format_err(path: &Path, message: impl Into<String>) -> IoError {
    IoError::Format { path: path.display().to_string(), message: message.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldHeader {
    pub format: String,
    pub version: u32,
    pub dtype: String,
    pub order: String,
    pub shape: [usize; 3],
    pub class: String,
    pub lengths: [f64; 3],
    pub n: usize,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub meta: serde_json::Value,
}

pub fn write_field(path: &Path, f: &ScalarField<f64>, meta: serde_json::Value) -> Result<(), IoError> {
    let v = f.values();
    let sh = v.shape();
    let header = FieldHeader {
        format: FIELD_FORMAT.into(),
        version: FIELD_VERSION,
        dtype: "f64-le".into(),
        order: "row-major".into(),
        shape: [sh[0], sh[1], sh[2]],
        class: f.class().name().into(),
        lengths: f.grid().domain().lengths(),
        n: f.grid().n(),
        meta,
    };
    let mut buf = serde_json::to_vec(&header).expect("header serialises");
    buf.push(b'\n');
    buf.reserve(v.len() * 8);
    for x in v.iter() {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    File::create(path).and_then(|mut h| h.write_all(&buf)).map_err(os(path))
}

pub fn read_field_raw(path: &Path) -> Result<(FieldHeader, Array3<f64>), IoError> {
    let mut r = BufReader::new(File::open(path).map_err(os(path))?);
    let mut line = Vec::new();
    r.read_until(b'\n', &mut line).map_err(os(path))?;
    let header: FieldHeader =
        serde_json::from_slice(&line).map_err(|e| format_err(path, format!("bad header: {e}")))?;
    if header.format != FIELD_FORMAT || header.version != FIELD_VERSION || header.dtype != "f64-le" {
        return Err(format_err(path, "unsupported field format"));
    }
    let mut body = Vec::new();
    r.read_to_end(&mut body).map_err(os(path))?;
    let count: usize = header.shape.iter().product();
    if body.len() != count * 8 {
        return Err(format_err(path, format!("expected {} bytes of data, found {}", count * 8, body.len())));
    }
    let vals: Vec<f64> = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let arr = Array3::from_shape_vec(header.shape, vals).map_err(|e| format_err(path, e.to_string()))?;
    Ok((header, arr))
}

/// Reads a field and attaches it to `grid`, which must match the header.
pub fn read_field(path: &Path, grid: &Arc<Grid<f64>>) -> Result<(FieldHeader, ScalarField<f64>), IoError> {
    let (h, arr) = read_field_raw(path)?;
    let class = BoundaryClass::from_name(&h.class).ok_or_else(|| format_err(path, format!("unknown class {}", h.class)))?;
    if h.n != grid.n() || h.lengths != grid.domain().lengths() {
        return Err(format_err(path, "field grid does not match the configuration"));
    }
    let f = ScalarField::from_nodal(grid.clone(), class, arr).map_err(|e| format_err(path, e.to_string()))?;
    Ok((h, f))
}

pub fn write_trace(path: &Path, trace: &[TraceRow<f64>]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["iteration", "J", "grad_norm", "omega", "mu", "c1_residual", "c2_residual"])?;
    for r in trace {
        w.write_record([
            r.iteration.to_string(),
            format!("{:e}", r.j),
            format!("{:e}", r.grad_norm),
            format!("{:e}", r.omega),
            r.mu.map(|m| format!("{m:e}")).unwrap_or_default(),
            format!("{:e}", r.c1),
            format!("{:e}", r.c2),
        ])?;
    }
    w.flush().map_err(os(path))?;
    Ok(())
}

/// Writes rows of pre-formatted cells under `header`.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush().map_err(os(path))?;
    Ok(())
}

pub fn sha256_file(path: &Path) -> Result<String, IoError> {
    let bytes = fs::read(path).map_err(os(path))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

pub fn ensure_dir(path: &Path) -> Result<(), IoError> {
    fs::create_dir_all(path).map_err(os(path))
}
