//! Artifact readers and writers.

use crate::error::{CliError, CliResult};
use gfield::mesh::{Mesh, Point};
use gfield::sparse::{read_matrix_market, write_matrix_market};
use gfield::SparseMatrix;
use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

pub fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_bytes(path, s.as_bytes())
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> CliResult<()> {
    std::fs::write(path, bytes).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

pub fn read_mesh(path: &Path) -> CliResult<Mesh> {
    let mesh = Mesh::from_json(&read_text(path)?).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    mesh.validate()?;
    Ok(mesh)
}

pub fn read_matrix(path: &Path) -> CliResult<SparseMatrix> {
    let f = File::open(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    Ok(read_matrix_market(BufReader::new(f))?)
}

pub fn write_matrix(path: &Path, m: &SparseMatrix) -> CliResult<()> {
    let f = File::create(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let mut w = BufWriter::new(f);
    write_matrix_market(m, &mut w)?;
    w.flush().map_err(|e| CliError::input(e.to_string()))
}

/// Points from CSV with header `x,y[,value]`.
pub fn read_points_csv(path: &Path) -> CliResult<(Vec<Point>, Option<Vec<f64>>)> {
    let f = File::open(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(f);
    let headers = rdr.headers()?.clone();
    let names: Vec<&str> = headers.iter().collect();
    let with_value = match names.as_slice() {
        ["x", "y"] => false,
        ["x", "y", "value"] => true,
        _ => return Err(CliError::input(format!("{}: header must be x,y[,value], got {}", path.display(), names.join(",")))),
    };
    let mut pts = Vec::new();
    let mut values = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |i: usize| -> CliResult<f64> {
            let s = rec.get(i).unwrap_or("");
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::input(format!("{}: row {}: '{s}' is not a finite number", path.display(), k + 2)))
        };
        pts.push([field(0)?, field(1)?]);
        if with_value {
            values.push(field(2)?);
        }
    }
    Ok((pts, with_value.then_some(values)))
}

/// CSV with the given header and rows, floats in shortest round-trip form.
pub fn write_csv(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<String>>) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush().map_err(|e| CliError::input(e.to_string()))
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

/// Absolute form of an existing input path.
pub fn resolve_input(path: &Path) -> CliResult<PathBuf> {
    path.canonicalize().map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

/// Absolute form of an output path whose directory must exist.
pub fn resolve_output(path: &Path) -> CliResult<PathBuf> {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let dir = parent.canonicalize().map_err(|e| CliError::input(format!("{}: {e}", parent.display())))?;
    let name = path.file_name().ok_or_else(|| CliError::input(format!("{}: not a file path", path.display())))?;
    Ok(dir.join(name))
}

/// Sidecar path `<path><suffix>`.
pub fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}
