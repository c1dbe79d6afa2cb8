//! Matrix Market coordinate format (`real general` / `real symmetric`).

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MmSymmetry {
    General,
    Symmetric,
}

/// Renders `a` as Matrix Market text. With `Symmetric`, only the lower
/// triangle is written.
pub fn to_matrix_market_string<T: Real>(a: &CsrMatrix<T>, symmetry: MmSymmetry) -> String {
    let stored = match symmetry {
        MmSymmetry::General => a.clone(),
        MmSymmetry::Symmetric => a.lower_triangle(),
    };
    let kind = match symmetry {
        MmSymmetry::General => "general",
        MmSymmetry::Symmetric => "symmetric",
    };
    let mut out = String::with_capacity(32 * stored.nnz() + 64);
    out.push_str(&format!("%%MatrixMarket matrix coordinate real {kind}\n"));
    out.push_str(&format!("{} {} {}\n", a.nrows(), a.ncols(), stored.nnz()));
    for i in 0..stored.nrows() {
        let (cols, vals) = stored.row(i);
        for (c, v) in cols.iter().zip(vals) {
            out.push_str(&format!("{} {} {:.16e}\n", i + 1, c + 1, v.as_f64()));
        }
    }
    out
}

/// Writes `a`, choosing the symmetric qualifier when `a` passes the symmetry predicate.
pub fn write_matrix_market<T: Real>(a: &CsrMatrix<T>, path: impl AsRef<Path>) -> Result<()> {
    let sym = if a.nrows() == a.ncols() && a.is_symmetric() {
        MmSymmetry::Symmetric
    } else {
        MmSymmetry::General
    };
    write_matrix_market_as(a, sym, path)
}

pub fn write_matrix_market_as<T: Real>(a: &CsrMatrix<T>, symmetry: MmSymmetry, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(to_matrix_market_string(a, symmetry).as_bytes())
        .map_err(|e| Error::io(path, e))
}

pub fn parse_matrix_market<T: Real>(text: &str) -> Result<CsrMatrix<T>> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::parse(Some(1), "empty file"))?;
    let tokens: Vec<String> = header.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(Error::parse(Some(1), "missing %%MatrixMarket matrix header"));
    }
    if tokens[2] != "coordinate" || tokens[3] != "real" {
        return Err(Error::parse(Some(1), format!("unsupported format {} {}", tokens[2], tokens[3])));
    }
    let symmetric = match tokens[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(Error::parse(Some(1), format!("unsupported symmetry {other}"))),
    };
    let mut size: Option<(usize, usize, usize)> = None;
    let mut triplets = Vec::new();
    for (lineno, line) in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        let ln = Some(lineno + 1);
        match size {
            None => {
                if parts.len() != 3 {
                    return Err(Error::parse(ln, "expected `nrows ncols nnz`"));
                }
                let p = |s: &str| s.parse::<usize>().map_err(|e| Error::parse(ln, e.to_string()));
                size = Some((p(parts[0])?, p(parts[1])?, p(parts[2])?));
                triplets.reserve(size.unwrap().2 * if symmetric { 2 } else { 1 });
            }
            Some((nr, nc, _)) => {
                if parts.len() != 3 {
                    return Err(Error::parse(ln, "expected `i j value`"));
                }
                let i: usize = parts[0].parse().map_err(|_| Error::parse(ln, "bad row index"))?;
                let j: usize = parts[1].parse().map_err(|_| Error::parse(ln, "bad column index"))?;
                let v: f64 = parts[2].parse().map_err(|_| Error::parse(ln, "bad value"))?;
                if i == 0 || j == 0 || i > nr || j > nc {
                    return Err(Error::parse(ln, format!("index ({i}, {j}) out of range")));
                }
                let v = T::lit(v);
                triplets.push((i - 1, j - 1, v));
                if symmetric && i != j {
                    triplets.push((j - 1, i - 1, v));
                }
            }
        }
    }
    let (nr, nc, nnz) = size.ok_or_else(|| Error::parse(None, "missing size line"))?;
    let stored = if symmetric {
        triplets.iter().filter(|t| t.0 >= t.1).count()
    } else {
        triplets.len()
    };
    if stored != nnz {
        return Err(Error::parse(None, format!("expected {nnz} entries, found {stored}")));
    }
    CsrMatrix::from_triplets(nr, nc, &triplets)
}

pub fn read_matrix_market<T: Real>(path: impl AsRef<Path>) -> Result<CsrMatrix<T>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_matrix_market(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_header_and_count() {
        let s = to_matrix_market_string(&CsrMatrix::<f64>::identity(2), MmSymmetry::Symmetric);
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "%%MatrixMarket matrix coordinate real symmetric");
        assert_eq!(lines[1], "2 2 2");
        assert_eq!(lines.len(), 4);
    }

    #[test]
    fn general_round_trip_exact() {
        let a = CsrMatrix::from_triplets(2, 3, &[(0, 0, 0.1), (1, 2, -1.0 / 3.0), (0, 2, 1e-300)]).unwrap();
        let s = to_matrix_market_string(&a, MmSymmetry::General);
        let b: CsrMatrix<f64> = parse_matrix_market(&s).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn symmetric_expands() {
        let text = "%%MatrixMarket matrix coordinate real symmetric\n% c\n2 2 2\n1 1 2.0\n2 1 -1.0\n";
        let a: CsrMatrix<f64> = parse_matrix_market(text).unwrap();
        assert_eq!(a.get(0, 1), -1.0);
        assert_eq!(a.get(1, 0), -1.0);
        assert_eq!(a.nnz(), 3);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(parse_matrix_market::<f64>("%%MatrixMarket matrix array real general\n").is_err());
        assert!(parse_matrix_market::<f64>("%%MatrixMarket matrix coordinate real general\n1 1 1\n2 1 1.0\n").is_err());
        assert!(parse_matrix_market::<f64>("%%MatrixMarket matrix coordinate real general\n1 1 2\n1 1 1.0\n").is_err());
    }
}
