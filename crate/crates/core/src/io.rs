//! Matrix Market coordinate files and plain-text vectors.
//!
//! Matrices are written as `%%MatrixMarket matrix coordinate real general`
//! with 1-based indices; every value is printed with 17 significant digits so
//! a write/read cycle is lossless.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{GaveError, Result};
use crate::linalg::SparseMatrix;

const HEADER: &str = "%%MatrixMarket matrix coordinate real general";

/// Formats a value with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_err(location: impl Into<String>, message: impl Into<String>) -> GaveError {
    GaveError::Parse {
        location: location.into(),
        message: message.into(),
    }
}

pub fn write_matrix_market(a: &SparseMatrix, mut out: impl Write) -> Result<()> {
    writeln!(out, "{HEADER}")?;
    writeln!(out, "{} {} {}", a.n_rows(), a.n_cols(), a.nnz())?;
    for (r, c, v) in a.triplets() {
        writeln!(out, "{} {} {}", r + 1, c + 1, fmt17(v))?;
    }
    Ok(())
}

/// Reads a `coordinate real` matrix. `general` and `symmetric` storage are
/// accepted; symmetric files are expanded to both triangles.
pub fn read_matrix_market(input: impl Read) -> Result<SparseMatrix> {
    let reader = BufReader::new(input);
    let mut lines = reader.lines().enumerate();

    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err("line 1", "empty file"))?;
    let header = header?;
    let tokens: Vec<String> = header.split_whitespace().map(|t| t.to_lowercase()).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" {
        return Err(parse_err("line 1", format!("bad header `{header}`")));
    }
    if tokens[1] != "matrix" || tokens[2] != "coordinate" || tokens[3] != "real" {
        return Err(parse_err(
            "line 1",
            "only `matrix coordinate real` files are supported",
        ));
    }
    let symmetric = match tokens[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(parse_err("line 1", format!("unsupported symmetry `{other}`"))),
    };

    let mut size: Option<(usize, usize, usize)> = None;
    let mut triplets = Vec::new();
    for (idx, line) in lines {
        let line = line?;
        let loc = format!("line {}", idx + 1);
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        match size {
            None => {
                if fields.len() != 3 {
                    return Err(parse_err(loc, "size line needs `rows cols nnz`"));
                }
                let parse = |s: &str| {
                    s.parse::<usize>()
                        .map_err(|e| parse_err(loc.clone(), format!("`{s}`: {e}")))
                };
                let dims = (parse(fields[0])?, parse(fields[1])?, parse(fields[2])?);
                triplets.reserve(dims.2);
                size = Some(dims);
            }
            Some((m, n, _)) => {
                if fields.len() != 3 {
                    return Err(parse_err(loc, "entry line needs `row col value`"));
                }
                let r: usize = fields[0]
                    .parse()
                    .map_err(|e| parse_err(loc.clone(), format!("row index: {e}")))?;
                let c: usize = fields[1]
                    .parse()
                    .map_err(|e| parse_err(loc.clone(), format!("column index: {e}")))?;
                let v: f64 = fields[2]
                    .parse()
                    .map_err(|e| parse_err(loc.clone(), format!("value: {e}")))?;
                if r == 0 || c == 0 || r > m || c > n {
                    return Err(parse_err(loc, format!("index ({r}, {c}) out of range")));
                }
                triplets.push((r - 1, c - 1, v));
                if symmetric && r != c {
                    triplets.push((c - 1, r - 1, v));
                }
            }
        }
    }
    let (m, n, nnz) = size.ok_or_else(|| parse_err("eof", "missing size line"))?;
    let declared = if symmetric {
        triplets.iter().filter(|t| t.0 >= t.1).count()
    } else {
        triplets.len()
    };
    if declared != nnz {
        return Err(parse_err(
            "eof",
            format!("header declares {nnz} entries, found {declared}"),
        ));
    }
    let mut seen = triplets.iter().map(|t| (t.0, t.1)).collect::<Vec<_>>();
    seen.sort_unstable();
    if seen.windows(2).any(|w| w[0] == w[1]) {
        return Err(parse_err("body", "duplicate (row, col) entry"));
    }
    SparseMatrix::from_triplets(m, n, &triplets)
}

pub fn save_matrix(a: &SparseMatrix, path: &Path) -> Result<()> {
    let f = fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(f);
    write_matrix_market(a, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_matrix(path: &Path) -> Result<SparseMatrix> {
    read_matrix_market(fs::File::open(path)?).map_err(|e| match e {
        GaveError::Parse { location, message } => GaveError::Parse {
            location: format!("{}: {location}", path.display()),
            message,
        },
        other => other,
    })
}

pub fn write_vector(x: &[f64], mut out: impl Write) -> Result<()> {
    for v in x {
        writeln!(out, "{}", fmt17(*v))?;
    }
    Ok(())
}

/// One value per line; blank lines are ignored.
pub fn read_vector(input: impl Read) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        out.push(t.parse::<f64>().map_err(|e| {
            parse_err(format!("line {}", idx + 1), format!("`{t}`: {e}"))
        })?);
    }
    Ok(out)
}

pub fn save_vector(x: &[f64], path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(fs::File::create(path)?);
    write_vector(x, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_vector(path: &Path) -> Result<Vec<f64>> {
    read_vector(fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn writes_header_one_based_and_17_digits() {
        let a = SparseMatrix::from_dense_rows(&[vec![0.1, 0.0], vec![0.0, -2.0]]).unwrap();
        let mut buf = Vec::new();
        write_matrix_market(&a, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "%%MatrixMarket matrix coordinate real general\n2 2 2\n\
             1 1 1.0000000000000001e-1\n2 2 -2.0000000000000000e0\n"
        );
    }

    #[test]
    fn reads_comments_and_symmetric() {
        let src = "%%MatrixMarket matrix coordinate real symmetric\n% a comment\n3 3 2\n1 1 4\n3 1 -1\n";
        let a = read_matrix_market(src.as_bytes()).unwrap();
        assert_eq!(a.get(0, 2), -1.0);
        assert_eq!(a.get(2, 0), -1.0);
        assert_eq!(a.nnz(), 3);
    }

    #[test]
    fn rejects_malformed_input() {
        let bad = [
            "%%MatrixMarket matrix array real general\n1 1\n1\n",
            "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n",
            "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n",
            "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n1 1 2.0\n",
            "%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 abc\n",
            "not a header\n",
        ];
        for src in bad {
            assert!(read_matrix_market(src.as_bytes()).is_err(), "{src}");
        }
    }

    #[test]
    fn vector_text_format() {
        let mut buf = Vec::new();
        write_vector(&[1.0, -0.6], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone()).unwrap(),
            "1.0000000000000000e0\n-5.9999999999999998e-1\n"
        );
        assert_eq!(read_vector(buf.as_slice()).unwrap(), vec![1.0, -0.6]);
        assert!(read_vector("1.0\nx\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn matrix_market_roundtrip_is_lossless(
            entries in proptest::collection::vec((0usize..8, 0usize..6, -1e6f64..1e6), 0..30)
        ) {
            let a = SparseMatrix::from_triplets(8, 6, &entries).unwrap();
            let mut buf = Vec::new();
            write_matrix_market(&a, &mut buf).unwrap();
            let b = read_matrix_market(buf.as_slice()).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
