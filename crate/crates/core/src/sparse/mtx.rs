//! MatrixMarket coordinate format.
//!
//! Symmetric matrices are written with the `symmetric` qualifier and only
//! their lower triangle; general matrices list every stored entry. Values
//! use the shortest representation that round-trips exactly.

use super::SparseMatrix;
use crate::error::{Error, Result};
use std::io::{BufRead, Write};

pub fn write_matrix_market<W: Write>(m: &SparseMatrix, mut w: W) -> Result<()> {
    let symmetric = m.is_symmetric();
    let kind = if symmetric { "symmetric" } else { "general" };
    writeln!(w, "%%MatrixMarket matrix coordinate real {kind}")?;
    let entries: Vec<_> = m.triplets().filter(|&(i, j, _)| !symmetric || i >= j).collect();
    writeln!(w, "{} {} {}", m.n_rows(), m.n_cols(), entries.len())?;
    for (i, j, v) in entries {
        writeln!(w, "{} {} {:e}", i + 1, j + 1, v)?;
    }
    Ok(())
}

pub fn read_matrix_market<R: BufRead>(r: R) -> Result<SparseMatrix> {
    let mut lines = r.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::Parse("empty MatrixMarket file".into()))?;
    let header = header?;
    let tokens: Vec<String> = header.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if tokens.len() < 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" || tokens[2] != "coordinate" {
        return Err(Error::Parse(format!("unsupported MatrixMarket header: {header}")));
    }
    if tokens[3] != "real" && tokens[3] != "integer" {
        return Err(Error::Parse(format!("unsupported field type {}", tokens[3])));
    }
    let symmetric = match tokens[4].as_str() {
        "symmetric" => true,
        "general" => false,
        other => return Err(Error::Parse(format!("unsupported symmetry {other}"))),
    };

    let mut size: Option<(usize, usize, usize)> = None;
    let mut triplets = Vec::new();
    for (lineno, line) in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let bad = |m: &str| Error::MalformedLine { line: lineno + 1, message: m.to_string() };
        let f: Vec<&str> = t.split_whitespace().collect();
        match size {
            None => {
                if f.len() != 3 {
                    return Err(bad("expected 'rows cols nnz'"));
                }
                let p = |s: &str| s.parse::<usize>().map_err(|_| bad("bad size"));
                size = Some((p(f[0])?, p(f[1])?, p(f[2])?));
            }
            Some((nr, nc, _)) => {
                if f.len() != 3 {
                    return Err(bad("expected 'i j value'"));
                }
                let i: usize = f[0].parse().map_err(|_| bad("bad row index"))?;
                let j: usize = f[1].parse().map_err(|_| bad("bad column index"))?;
                let v: f64 = f[2].parse().map_err(|_| bad("bad value"))?;
                if i == 0 || j == 0 || i > nr || j > nc {
                    return Err(bad("index out of range"));
                }
                triplets.push((i - 1, j - 1, v));
                if symmetric && i != j {
                    triplets.push((j - 1, i - 1, v));
                }
            }
        }
    }
    let (nr, nc, nnz) = size.ok_or_else(|| Error::Parse("missing size line".into()))?;
    let read = if symmetric { triplets.iter().filter(|t| t.0 >= t.1).count() } else { triplets.len() };
    if read != nnz {
        return Err(Error::Parse(format!("expected {nnz} entries, found {read}")));
    }
    Ok(SparseMatrix::from_triplets(nr, nc, &triplets))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_round_trip_is_exact() {
        let m = SparseMatrix::from_triplets(3, 3, &[(0, 0, 1.0 / 3.0), (0, 2, -0.1), (2, 0, -0.1), (1, 1, 7e-300), (2, 2, 2.0)]);
        let mut buf = Vec::new();
        write_matrix_market(&m, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("%%MatrixMarket matrix coordinate real symmetric"));
        let back = read_matrix_market(&buf[..]).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn general_matrix_keeps_all_entries() {
        let m = SparseMatrix::from_triplets(2, 3, &[(0, 1, 1.5), (1, 2, -2.0)]);
        let mut buf = Vec::new();
        write_matrix_market(&m, &mut buf).unwrap();
        assert_eq!(read_matrix_market(&buf[..]).unwrap(), m);
    }

    #[test]
    fn rejects_bad_entry() {
        let text = "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n";
        assert!(matches!(read_matrix_market(text.as_bytes()), Err(Error::MalformedLine { line: 3, .. })));
    }
}
