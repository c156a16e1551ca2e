//! Matrix Market reader and writer.
//!
//! Coordinate files (`real` or `integer`, `general` or `symmetric`) map to
//! [`SparseMatrix`]; `array` files map to dense matrices. Values are written
//! with 17 significant digits so that a write/read cycle is exact.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Coordinate,
    Array,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
}

struct Header {
    format: Format,
    symmetry: Symmetry,
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn parse_header(path: &Path, line: &str) -> Result<Header> {
    let lower = line.to_ascii_lowercase();
    let tokens: Vec<&str> = lower.split_whitespace().collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(parse_err(path, 1, "expected '%%MatrixMarket matrix <format> <field> <symmetry>'"));
    }
    let format = match tokens[2] {
        "coordinate" => Format::Coordinate,
        "array" => Format::Array,
        other => return Err(parse_err(path, 1, format!("unsupported format '{other}'"))),
    };
    match tokens[3] {
        "real" | "integer" | "double" => {}
        other => return Err(parse_err(path, 1, format!("unsupported field '{other}'"))),
    }
    let symmetry = match tokens[4] {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        other => return Err(parse_err(path, 1, format!("unsupported symmetry '{other}'"))),
    };
    Ok(Header { format, symmetry })
}

fn parse_usize(path: &Path, line: usize, tok: &str) -> Result<usize> {
    tok.parse()
        .map_err(|_| parse_err(path, line, format!("expected a non-negative integer, found '{tok}'")))
}

fn parse_f64(path: &Path, line: usize, tok: &str) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| parse_err(path, line, format!("expected a real number, found '{tok}'")))?;
    if !v.is_finite() {
        return Err(parse_err(path, line, "non-finite value"));
    }
    Ok(v)
}

/// Data lines as `(line_number, tokens)`, skipping comments and blanks.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines()
        .enumerate()
        .skip(1)
        .filter(|(_, l)| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with('%')
        })
        .map(|(i, l)| (i + 1, l.split_whitespace().collect()))
}

enum Parsed {
    Sparse(SparseMatrix),
    Dense(DenseMatrix),
}

fn parse(path: &Path) -> Result<Parsed> {
    let text = fs::read_to_string(path)?;
    let first = text
        .lines()
        .next()
        .ok_or_else(|| parse_err(path, 1, "empty file"))?;
    let header = parse_header(path, first)?;
    let mut lines = data_lines(&text);
    let (size_line, size) = lines
        .next()
        .ok_or_else(|| parse_err(path, 2, "missing size line"))?;

    match header.format {
        Format::Coordinate => {
            if size.len() != 3 {
                return Err(parse_err(path, size_line, "size line needs 'rows cols nnz'"));
            }
            let rows = parse_usize(path, size_line, size[0])?;
            let cols = parse_usize(path, size_line, size[1])?;
            let nnz = parse_usize(path, size_line, size[2])?;
            let mut triplets = Vec::with_capacity(nnz * 2);
            let mut seen = 0;
            for (ln, tok) in lines {
                if tok.len() != 3 {
                    return Err(parse_err(path, ln, format!("expected 3 fields, found {}", tok.len())));
                }
                let i = parse_usize(path, ln, tok[0])?;
                let j = parse_usize(path, ln, tok[1])?;
                let v = parse_f64(path, ln, tok[2])?;
                if i == 0 || j == 0 || i > rows || j > cols {
                    return Err(parse_err(path, ln, format!("index ({i}, {j}) outside {rows}x{cols}")));
                }
                triplets.push((i - 1, j - 1, v));
                if header.symmetry == Symmetry::Symmetric && i != j {
                    triplets.push((j - 1, i - 1, v));
                }
                seen += 1;
            }
            if seen != nnz {
                return Err(parse_err(
                    path,
                    size_line,
                    format!("header announces {nnz} entries, file has {seen}"),
                ));
            }
            Ok(Parsed::Sparse(SparseMatrix::from_triplets(rows, cols, &triplets)?))
        }
        Format::Array => {
            if size.len() != 2 {
                return Err(parse_err(path, size_line, "size line needs 'rows cols'"));
            }
            let rows = parse_usize(path, size_line, size[0])?;
            let cols = parse_usize(path, size_line, size[1])?;
            let mut values = Vec::with_capacity(rows * cols);
            for (ln, tok) in lines {
                if tok.len() != 1 {
                    return Err(parse_err(path, ln, format!("expected 1 field, found {}", tok.len())));
                }
                values.push(parse_f64(path, ln, tok[0])?);
            }
            let mut m = DenseMatrix::zeros(rows, cols);
            match header.symmetry {
                Symmetry::General => {
                    if values.len() != rows * cols {
                        return Err(parse_err(
                            path,
                            size_line,
                            format!("expected {} values, found {}", rows * cols, values.len()),
                        ));
                    }
                    m.as_mut_slice().copy_from_slice(&values);
                }
                Symmetry::Symmetric => {
                    let expected = rows * (rows + 1) / 2;
                    if rows != cols || values.len() != expected {
                        return Err(parse_err(path, size_line, "malformed symmetric array"));
                    }
                    let mut it = values.into_iter();
                    for j in 0..cols {
                        for i in j..rows {
                            let v = it.next().expect("length checked");
                            m[(i, j)] = v;
                            m[(j, i)] = v;
                        }
                    }
                }
            }
            Ok(Parsed::Dense(m))
        }
    }
}

/// Reads a coordinate (or array) Matrix Market file into sparse storage.
/// Symmetric files are expanded to full storage.
pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<SparseMatrix> {
    Ok(match parse(path.as_ref())? {
        Parsed::Sparse(s) => s,
        Parsed::Dense(d) => SparseMatrix::from_dense(&d),
    })
}

/// Reads either format into a dense matrix.
pub fn read_dense_matrix_market(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    Ok(match parse(path.as_ref())? {
        Parsed::Sparse(s) => s.to_dense(),
        Parsed::Dense(d) => d,
    })
}

/// Writes `contents` to a sibling temporary file and renames it into place.
pub(crate) fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("'{}' is not a file path", path.display())))?;
    let tmp_name = format!(".{}.tmp{}", file_name.to_string_lossy(), std::process::id());
    let tmp = match dir {
        Some(d) => d.join(tmp_name),
        None => Path::new(&tmp_name).to_path_buf(),
    };
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Writes a general coordinate file.
pub fn write_matrix_market(a: &SparseMatrix, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::with_capacity(40 * a.nnz() + 64);
    out.push_str("%%MatrixMarket matrix coordinate real general\n");
    out.push_str(&format!("{} {} {}\n", a.nrows(), a.ncols(), a.nnz()));
    for (i, j, v) in a.triplets() {
        out.push_str(&format!("{} {} {:.16e}\n", i + 1, j + 1, v));
    }
    write_atomic(path.as_ref(), out.as_bytes())
}

/// Writes a general array file (column-major).
pub fn write_dense_matrix_market(m: &DenseMatrix, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::with_capacity(26 * m.len() + 64);
    out.push_str("%%MatrixMarket matrix array real general\n");
    out.push_str(&format!("{} {}\n", m.nrows(), m.ncols()));
    for v in m.iter() {
        out.push_str(&format!("{v:.16e}\n"));
    }
    write_atomic(path.as_ref(), out.as_bytes())
}
