use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{io_err, IoError};
use crate::linalg::CsrMatrix;
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
    SkewSymmetric,
}

fn parse_err(path: &Path, line: usize, detail: impl Into<String>) -> IoError {
    IoError::Parse {
        path: path.to_path_buf(),
        line,
        detail: detail.into(),
    }
}

fn parse_value<T: Real>(path: &Path, line: usize, tok: Option<&str>) -> Result<T, IoError> {
    let tok = tok.ok_or_else(|| parse_err(path, line, "missing value"))?;
    let v: f64 = tok
        .parse()
        .map_err(|_| parse_err(path, line, format!("invalid number '{tok}'")))?;
    Ok(T::lit(v))
}

fn parse_index(path: &Path, line: usize, tok: Option<&str>) -> Result<usize, IoError> {
    let tok = tok.ok_or_else(|| parse_err(path, line, "missing index"))?;
    tok.parse()
        .map_err(|_| parse_err(path, line, format!("invalid index '{tok}'")))
}

/// Reads `%%MatrixMarket matrix coordinate real|integer general|symmetric|skew-symmetric`.
/// Symmetric storage is expanded, 1-based indices shifted, duplicates summed.
pub fn read_matrix_market<T: Real>(path: impl AsRef<Path>) -> Result<CsrMatrix<T>, IoError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut lines = text.lines().enumerate();
    let header_err = |line: usize, detail: &str| IoError::MalformedHeader {
        path: path.to_path_buf(),
        line,
        detail: detail.to_string(),
    };
    let (_, header) = lines.next().ok_or_else(|| header_err(1, "empty file"))?;
    let words: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if words.len() != 5 || words[0] != "%%matrixmarket" || words[1] != "matrix" {
        return Err(header_err(1, header));
    }
    if words[2] != "coordinate" {
        return Err(header_err(1, "only coordinate format is supported"));
    }
    match words[3].as_str() {
        "real" | "integer" | "double" => {}
        other => {
            return Err(IoError::NonRealField {
                path: path.to_path_buf(),
                field: other.to_string(),
            })
        }
    }
    let symmetry = match words[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" => Symmetry::SkewSymmetric,
        _ => return Err(header_err(1, "unsupported symmetry")),
    };

    let mut body = lines.filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });
    let (size_no, size_line) = body.next().ok_or_else(|| header_err(2, "missing size line"))?;
    let mut tok = size_line.split_whitespace();
    let rows = parse_index(path, size_no + 1, tok.next())?;
    let cols = parse_index(path, size_no + 1, tok.next())?;
    let nnz = parse_index(path, size_no + 1, tok.next())?;

    let mut triplets = Vec::with_capacity(if symmetry == Symmetry::General { nnz } else { 2 * nnz });
    let mut seen = 0;
    for (no, line) in body {
        let line_no = no + 1;
        let mut tok = line.split_whitespace();
        let r = parse_index(path, line_no, tok.next())?;
        let c = parse_index(path, line_no, tok.next())?;
        let v: T = parse_value(path, line_no, tok.next())?;
        if r == 0 || c == 0 || r > rows || c > cols {
            return Err(IoError::IndexOutOfRange {
                path: path.to_path_buf(),
                line: line_no,
                row: r,
                col: c,
                rows,
                cols,
            });
        }
        let (i, j) = (r - 1, c - 1);
        triplets.push((i, j, v));
        if i != j {
            match symmetry {
                Symmetry::General => {}
                Symmetry::Symmetric => triplets.push((j, i, v)),
                Symmetry::SkewSymmetric => triplets.push((j, i, -v)),
            }
        }
        seen += 1;
    }
    if seen != nnz {
        return Err(parse_err(path, 2, format!("header announces {nnz} entries, found {seen}")));
    }
    CsrMatrix::from_triplets(rows, cols, &triplets).map_err(|e| parse_err(path, 0, e.to_string()))
}

/// Writes general coordinate storage with 17 significant digits.
pub fn write_matrix_market<T: Real>(m: &CsrMatrix<T>, path: impl AsRef<Path>) -> Result<(), IoError> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let mut body = || -> std::io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", m.rows(), m.cols(), m.nnz())?;
        for (i, j, v) in m.triplets() {
            writeln!(w, "{} {} {:.16e}", i + 1, j + 1, v.to_f64_lossy())?;
        }
        w.flush()
    };
    body().map_err(io_err(path))
}

/// One value per line; blank lines and `%`/`#` comments are skipped. A
/// Matrix Market `array` header is accepted, in which case its size line is
/// checked against the entry count.
pub fn read_vector<T: Real>(path: impl AsRef<Path>) -> Result<Vec<T>, IoError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let is_mm = text
        .lines()
        .next()
        .is_some_and(|l| l.to_ascii_lowercase().starts_with("%%matrixmarket"));
    let mut expected = None;
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') || t.starts_with('#') {
            continue;
        }
        if is_mm && expected.is_none() {
            let mut tok = t.split_whitespace();
            let rows = parse_index(path, no + 1, tok.next())?;
            let cols = tok.next().map_or(Ok(1), |c| parse_index(path, no + 1, Some(c)))?;
            expected = Some(rows * cols);
            continue;
        }
        out.push(parse_value(path, no + 1, Some(t))?);
    }
    if let Some(n) = expected {
        if n != out.len() {
            return Err(parse_err(path, 1, format!("header announces {n} entries, found {}", out.len())));
        }
    }
    Ok(out)
}

pub fn write_vector<T: Real>(v: &[T], path: impl AsRef<Path>) -> Result<(), IoError> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let mut body = || -> std::io::Result<()> {
        for x in v {
            writeln!(w, "{:.16e}", x.to_f64_lossy())?;
        }
        w.flush()
    };
    body().map_err(io_err(path))
}
