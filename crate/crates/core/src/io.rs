//! CSV output of fields, profiles and convergence tables, and binary field
//! files for stored reference solutions.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bench::ErrorReport;
use crate::couple::FieldSolution;
use crate::error::{Error, Result};
use crate::mesh::SpectralMesh;

/// One line of a field CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldRow {
    pub x: f64,
    pub y: f64,
    pub phi_hat: Complex64,
    pub phi: Complex64,
    pub height: f64,
    pub height_norm: f64,
}

pub const FIELD_HEADER: [&str; 8] = ["x", "y", "re_phi_hat", "im_phi_hat", "re_phi", "im_phi", "H", "H_norm"];
pub const CONVERGENCE_HEADER: [&str; 6] = ["p", "n", "dof", "linf_error", "relative_error", "runtime_s"];
pub const PROFILE_HEADER: [&str; 2] = ["s", "H_norm"];

/// Shortest text with 17 significant digits.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(file))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format {
            path: path.to_path_buf(),
            reason: format!("{other:?}"),
        },
    }
}

pub fn field_rows(mesh: &SpectralMesh, sol: &FieldSolution) -> Vec<FieldRow> {
    mesh.coords()
        .iter()
        .enumerate()
        .map(|(i, c)| FieldRow {
            x: c[0],
            y: c[1],
            phi_hat: sol.phi_hat[i],
            phi: sol.phi[i],
            height: sol.height[i],
            height_norm: sol.height_norm[i],
        })
        .collect()
}

pub fn write_field_csv(path: &Path, rows: &[FieldRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(FIELD_HEADER).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.write_record([
            num(r.x),
            num(r.y),
            num(r.phi_hat.re),
            num(r.phi_hat.im),
            num(r.phi.re),
            num(r.phi.im),
            num(r.height),
            num(r.height_norm),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_field_csv(path: &Path) -> Result<Vec<FieldRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = r.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.iter().ne(FIELD_HEADER) {
        return Err(Error::Format {
            path: path.to_path_buf(),
            reason: format!("unexpected header {header:?}"),
        });
    }
    r.records()
        .map(|rec| {
            let rec = rec.map_err(|e| csv_error(path, e))?;
            let v: Vec<f64> = rec
                .iter()
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Format {
                    path: path.to_path_buf(),
                    reason: e.to_string(),
                })?;
            Ok(FieldRow {
                x: v[0],
                y: v[1],
                phi_hat: Complex64::new(v[2], v[3]),
                phi: Complex64::new(v[4], v[5]),
                height: v[6],
                height_norm: v[7],
            })
        })
        .collect()
}

pub fn write_profile_csv(path: &Path, series: &[(f64, f64)]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(PROFILE_HEADER).map_err(|e| csv_error(path, e))?;
    for &(s, h) in series {
        w.write_record([num(s), num(h)]).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Convergence table; `with_timing = false` writes a zero runtime so that
/// repeated runs give identical files.
pub fn write_convergence_csv(path: &Path, reports: &[ErrorReport], with_timing: bool) -> Result<()> {
    let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
    let mut w = csv_writer(path)?;
    w.write_record(CONVERGENCE_HEADER).map_err(|e| csv_error(path, e))?;
    for r in reports {
        let t = if with_timing { r.runtime_s } else { 0.0 };
        w.write_record([
            r.p.to_string(),
            r.n.to_string(),
            r.dof.to_string(),
            opt(r.linf_error),
            opt(r.relative_error),
            format!("{t:.3}"),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

const MAGIC: &[u8; 8] = b"MSWFIELD";
pub const FIELD_FILE_VERSION: u32 = 1;

/// Metadata stored in front of a binary field file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldMeta {
    pub version: u32,
    pub case: String,
    pub p: usize,
    pub nx: usize,
    pub ny: usize,
    /// SHA-256 of the configuration that produced the field.
    pub config_hash: String,
    pub residual: f64,
    /// SHA-256 of the binary payload.
    pub payload_hash: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Write nodal coordinates and complex values with metadata.
pub fn write_field_file(path: &Path, meta: &FieldMeta, coords: &[[f64; 2]], values: &[Complex64]) -> Result<()> {
    if coords.len() != values.len() {
        return Err(Error::Config("coordinate and value counts differ".into()));
    }
    let mut payload = Vec::with_capacity(8 + 32 * values.len());
    payload.extend_from_slice(&(values.len() as u64).to_le_bytes());
    for (c, v) in coords.iter().zip(values) {
        for x in [c[0], c[1], v.re, v.im] {
            payload.extend_from_slice(&x.to_le_bytes());
        }
    }
    let mut meta = meta.clone();
    meta.version = FIELD_FILE_VERSION;
    meta.payload_hash = sha256_hex(&payload);
    let json = serde_json::to_vec(&meta).map_err(|e| Error::Internal(e.to_string()))?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let write = |w: &mut BufWriter<File>, b: &[u8]| w.write_all(b).map_err(|e| Error::io(path, e));
    write(&mut w, MAGIC)?;
    write(&mut w, &FIELD_FILE_VERSION.to_le_bytes())?;
    write(&mut w, &(json.len() as u32).to_le_bytes())?;
    write(&mut w, &json)?;
    write(&mut w, &payload)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_field_file(path: &Path) -> Result<(FieldMeta, Vec<[f64; 2]>, Vec<Complex64>)> {
    let bad = |reason: &str| Error::Format {
        path: path.to_path_buf(),
        reason: reason.into(),
    };
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::new();
    BufReader::new(file).read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(bad("missing magic"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != FIELD_FILE_VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let jl = u32::from_le_bytes(bytes[12..16].try_into().expect("4 bytes")) as usize;
    let json = bytes.get(16..16 + jl).ok_or_else(|| bad("truncated metadata"))?;
    let meta: FieldMeta = serde_json::from_slice(json).map_err(|e| bad(&e.to_string()))?;
    let payload = &bytes[16 + jl..];
    if sha256_hex(payload) != meta.payload_hash {
        return Err(bad("payload hash mismatch"));
    }
    if payload.len() < 8 {
        return Err(bad("truncated payload"));
    }
    let n = u64::from_le_bytes(payload[..8].try_into().expect("8 bytes")) as usize;
    if payload.len() != 8 + 32 * n {
        return Err(bad("payload length mismatch"));
    }
    let f = |i: usize| f64::from_le_bytes(payload[8 + 8 * i..16 + 8 * i].try_into().expect("8 bytes"));
    let coords = (0..n).map(|j| [f(4 * j), f(4 * j + 1)]).collect();
    let values = (0..n).map(|j| Complex64::new(f(4 * j + 2), f(4 * j + 3))).collect();
    Ok((meta, coords, values))
}
