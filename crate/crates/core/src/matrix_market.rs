//! Matrix Market coordinate-format exchange for symmetric real matrices.
//!
//! Reading accepts `symmetric` files (either triangle stored) and `general`
//! files whose values are numerically symmetric. Input may be gzip-compressed;
//! it is detected from the magic bytes. Writing always emits the lower triangle
//! of a `symmetric` file with 17 significant digits, so a write/read cycle
//! reproduces every value bit for bit.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;

use crate::error::{KplError, Result};
use crate::sparse::SparseMatrix;

const GZIP_MAGIC: [u8; 2] = [0x1f, 0x8b];

fn parse_err(line: usize, msg: impl Into<String>) -> KplError {
    KplError::MatrixMarket {
        line,
        msg: msg.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    Symmetric,
    General,
}

/// Reads a matrix from a byte stream, decompressing gzip input transparently.
pub fn read_matrix_market<R: Read>(source: R) -> Result<SparseMatrix> {
    let mut buffered = BufReader::new(source);
    let is_gzip = buffered.fill_buf()?.starts_with(&GZIP_MAGIC);
    if is_gzip {
        read_plain(BufReader::new(GzDecoder::new(buffered)))
    } else {
        read_plain(buffered)
    }
}

/// Reads a `.mtx` or `.mtx.gz` file.
pub fn read_matrix_market_file(path: impl AsRef<Path>) -> Result<SparseMatrix> {
    read_matrix_market(File::open(path)?)
}

fn read_plain<R: BufRead>(reader: R) -> Result<SparseMatrix> {
    let mut lines = reader.lines().enumerate().map(|(k, l)| (k + 1, l));

    let (lineno, header) = lines.next().ok_or_else(|| parse_err(1, "empty input"))?;
    let header = header?;
    let symmetry = parse_header(lineno, &header)?;

    let mut dims: Option<usize> = None;
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    let mut n = 0usize;
    let mut expected = 0usize;
    let mut read = 0usize;
    for (lineno, line) in lines {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let mut tok = trimmed.split_whitespace();
        if dims.is_none() {
            let rows = parse_usize(lineno, tok.next())?;
            let cols = parse_usize(lineno, tok.next())?;
            let nnz = parse_usize(lineno, tok.next())?;
            if rows != cols {
                return Err(parse_err(
                    lineno,
                    format!("matrix is {rows}x{cols}, not square"),
                ));
            }
            if rows == 0 {
                return Err(KplError::ZeroDimension);
            }
            n = rows;
            expected = nnz;
            dims = Some(rows);
            triplets.reserve(2 * nnz);
            continue;
        }
        let i = parse_usize(lineno, tok.next())?;
        let j = parse_usize(lineno, tok.next())?;
        let v: f64 = tok
            .next()
            .ok_or_else(|| parse_err(lineno, "missing value"))?
            .parse()
            .map_err(|e| parse_err(lineno, format!("bad value: {e}")))?;
        if i == 0 || j == 0 || i > n || j > n {
            return Err(parse_err(
                lineno,
                format!("index ({i},{j}) out of range for dimension {n}"),
            ));
        }
        if !v.is_finite() {
            return Err(parse_err(lineno, format!("non-finite value {v}")));
        }
        read += 1;
        if read > expected {
            return Err(parse_err(lineno, "more entries than declared"));
        }
        let (i, j) = (i - 1, j - 1);
        triplets.push((i, j, v));
        if symmetry == Symmetry::Symmetric && i != j {
            triplets.push((j, i, v));
        }
    }
    if dims.is_none() {
        return Err(parse_err(0, "missing size line"));
    }
    if read != expected {
        return Err(parse_err(
            0,
            format!("declared {expected} entries, found {read}"),
        ));
    }

    triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    if let Some(w) = triplets
        .windows(2)
        .find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1))
    {
        return Err(parse_err(
            0,
            format!("duplicate entry ({}, {})", w[0].0 + 1, w[0].1 + 1),
        ));
    }
    let mut row_ptr = vec![0usize; n + 1];
    for t in &triplets {
        row_ptr[t.0 + 1] += 1;
    }
    for i in 0..n {
        row_ptr[i + 1] += row_ptr[i];
    }
    let col_idx = triplets.iter().map(|t| t.1).collect();
    let values = triplets.iter().map(|t| t.2).collect();
    SparseMatrix::from_csr(n, row_ptr, col_idx, values)
}

fn parse_header(lineno: usize, header: &str) -> Result<Symmetry> {
    let tok: Vec<String> = header
        .split_whitespace()
        .map(|t| t.to_ascii_lowercase())
        .collect();
    if tok.len() != 5 || tok[0] != "%%matrixmarket" || tok[1] != "matrix" {
        return Err(parse_err(lineno, format!("malformed header: {header:?}")));
    }
    if tok[2] != "coordinate" {
        return Err(parse_err(
            lineno,
            format!("unsupported format {:?}, expected coordinate", tok[2]),
        ));
    }
    match tok[3].as_str() {
        "real" | "integer" | "double" => {}
        other => return Err(parse_err(lineno, format!("non-real field {other:?}"))),
    }
    match tok[4].as_str() {
        "symmetric" => Ok(Symmetry::Symmetric),
        "general" => Ok(Symmetry::General),
        other => Err(parse_err(lineno, format!("unsupported symmetry {other:?}"))),
    }
}

fn parse_usize(lineno: usize, tok: Option<&str>) -> Result<usize> {
    let tok = tok.ok_or_else(|| parse_err(lineno, "truncated line"))?;
    tok.parse().map_err(|_| {
        parse_err(
            lineno,
            format!("expected a non-negative integer, got {tok:?}"),
        )
    })
}

/// Writes the lower triangle of `a` as a symmetric coordinate file.
pub fn write_matrix_market<W: Write>(a: &SparseMatrix, sink: W) -> Result<()> {
    let mut w = std::io::BufWriter::new(sink);
    let lower: Vec<_> = a.lower_triangle().collect();
    writeln!(w, "%%MatrixMarket matrix coordinate real symmetric")?;
    writeln!(w, "{} {} {}", a.n(), a.n(), lower.len())?;
    for (i, j, v) in lower {
        writeln!(w, "{} {} {:.16e}", i + 1, j + 1, v)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_matrix_market_file(a: &SparseMatrix, path: impl AsRef<Path>) -> Result<()> {
    write_matrix_market(a, File::create(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::laplacian_2d;
    use flate2::write::GzEncoder;
    use flate2::Compression;

    const LOWER_2X2: &str =
        "%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 4.0\n2 1 -1.0\n";

    #[test]
    fn symmetric_expansion() {
        let a = read_matrix_market(LOWER_2X2.as_bytes()).unwrap();
        assert_eq!(a.to_dense(), vec![vec![4.0, -1.0], vec![-1.0, 0.0]]);
    }

    #[test]
    fn upper_triangle_storage() {
        let src = "%%MatrixMarket matrix coordinate real symmetric\n% comment\n2 2 3\n1 1 4.0\n1 2 -1.0\n2 2 3\n";
        let a = read_matrix_market(src.as_bytes()).unwrap();
        assert_eq!(a.to_dense(), vec![vec![4.0, -1.0], vec![-1.0, 3.0]]);
    }

    #[test]
    fn general_symmetric_values_accepted() {
        let src =
            "%%MatrixMarket matrix coordinate real general\n2 2 4\n1 1 2\n1 2 1\n2 1 1\n2 2 2\n";
        let a = read_matrix_market(src.as_bytes()).unwrap();
        assert_eq!(a.nnz(), 4);
        let bad = "%%MatrixMarket matrix coordinate real general\n2 2 3\n1 1 2\n1 2 1\n2 2 2\n";
        assert!(read_matrix_market(bad.as_bytes()).is_err());
    }

    #[test]
    fn gzip_input() {
        let mut enc = GzEncoder::new(Vec::new(), Compression::default());
        enc.write_all(LOWER_2X2.as_bytes()).unwrap();
        let gz = enc.finish().unwrap();
        let a = read_matrix_market(gz.as_slice()).unwrap();
        assert_eq!(a.n(), 2);
    }

    #[test]
    fn rejects_bad_headers() {
        let cases = [
            "%%MatrixMarket matrix coordinate complex symmetric\n1 1 1\n1 1 1 0\n",
            "%%MatrixMarket matrix coordinate pattern symmetric\n1 1 1\n1 1\n",
            "%%MatrixMarket matrix coordinate real skew-symmetric\n1 1 0\n",
            "%%MatrixMarket matrix array real symmetric\n1 1\n1.0\n",
            "garbage\n",
            "",
        ];
        for src in cases {
            assert!(read_matrix_market(src.as_bytes()).is_err(), "{src:?}");
        }
    }

    #[test]
    fn rejects_out_of_range_and_counts() {
        let oob = "%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n3 1 1.0\n";
        assert!(matches!(
            read_matrix_market(oob.as_bytes()),
            Err(KplError::MatrixMarket { line: 3, .. })
        ));
        let short = "%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 1.0\n";
        assert!(read_matrix_market(short.as_bytes()).is_err());
        let dup = "%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 1.0\n1 1 1.0\n";
        assert!(read_matrix_market(dup.as_bytes()).is_err());
    }

    #[test]
    fn write_identity() {
        let mut out = Vec::new();
        write_matrix_market(&SparseMatrix::identity(2).unwrap(), &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "%%MatrixMarket matrix coordinate real symmetric");
        assert_eq!(lines[1], "2 2 2");
        assert_eq!(lines.len(), 4);
        assert!(lines[2].starts_with("1 1 1.0000000000000000e0"));
    }

    #[test]
    fn write_laplacian_lower_count() {
        // 4 diagonal entries plus the lower halves of the 4 grid edges
        let mut out = Vec::new();
        write_matrix_market(&laplacian_2d(2, 2).unwrap(), &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().nth(1), Some("4 4 8"));
        assert_eq!(text.lines().count(), 2 + 8);
    }
}
