//! Matrix Market reader and writer for dense real matrices.
//!
//! Array format is preferred for dense data and is what the writer
//! emits; the reader also accepts coordinate format. Real (and integer)
//! fields only, `general` or `symmetric` symmetry; complex and pattern
//! files are rejected. Array data is stored column-major in the file,
//! per the format specification.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Layout {
    Array,
    Coordinate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
}

pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_matrix_market(BufReader::new(file))
}

pub fn write_matrix_market(path: impl AsRef<Path>, matrix: &DenseMatrix) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    format_matrix_market(&mut w, matrix).map_err(|e| Error::io(path, e))
}

/// Writes array/real/general format, column-major, 17 significant digits.
pub fn format_matrix_market<W: Write>(w: &mut W, matrix: &DenseMatrix) -> std::io::Result<()> {
    writeln!(w, "%%MatrixMarket matrix array real general")?;
    writeln!(w, "{} {}", matrix.rows(), matrix.cols())?;
    for j in 0..matrix.cols() {
        for i in 0..matrix.rows() {
            writeln!(w, "{:.16e}", matrix.get(i, j))?;
        }
    }
    w.flush()
}

pub fn parse_matrix_market<R: BufRead>(reader: R) -> Result<DenseMatrix> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::MatrixMarket("empty input".into()))?
        .map_err(|e| Error::MatrixMarket(e.to_string()))?;
    let (layout, symmetry) = parse_header(&header)?;

    let mut data_lines = lines.filter_map(|l| match l {
        Ok(line) => {
            let trimmed = line.trim().to_string();
            if trimmed.is_empty() || trimmed.starts_with('%') {
                None
            } else {
                Some(Ok(trimmed))
            }
        }
        Err(e) => Some(Err(Error::MatrixMarket(e.to_string()))),
    });

    let size_line = data_lines
        .next()
        .ok_or_else(|| Error::MatrixMarket("missing size line".into()))??;
    let sizes: Vec<&str> = size_line.split_whitespace().collect();

    match layout {
        Layout::Array => {
            if sizes.len() != 2 {
                return Err(Error::MatrixMarket(format!(
                    "array size line must be 'rows cols', got '{size_line}'"
                )));
            }
            let rows = parse_dim(sizes[0])?;
            let cols = parse_dim(sizes[1])?;
            read_array(&mut data_lines, rows, cols, symmetry)
        }
        Layout::Coordinate => {
            if sizes.len() != 3 {
                return Err(Error::MatrixMarket(format!(
                    "coordinate size line must be 'rows cols nnz', got '{size_line}'"
                )));
            }
            let rows = parse_dim(sizes[0])?;
            let cols = parse_dim(sizes[1])?;
            let nnz = parse_dim(sizes[2])?;
            read_coordinate(&mut data_lines, rows, cols, nnz, symmetry)
        }
    }
}

fn parse_header(header: &str) -> Result<(Layout, Symmetry)> {
    let fields: Vec<String> = header.split_whitespace().map(|s| s.to_lowercase()).collect();
    if fields.len() != 5 || fields[0] != "%%matrixmarket" {
        return Err(Error::MatrixMarket(format!(
            "header must be '%%MatrixMarket matrix <format> <field> <symmetry>', got '{header}'"
        )));
    }
    if fields[1] != "matrix" {
        return Err(Error::MatrixMarket(format!(
            "unsupported object '{}'",
            fields[1]
        )));
    }
    let layout = match fields[2].as_str() {
        "array" => Layout::Array,
        "coordinate" => Layout::Coordinate,
        other => {
            return Err(Error::MatrixMarket(format!("unsupported format '{other}'")));
        }
    };
    match fields[3].as_str() {
        "real" | "integer" => {}
        "complex" => {
            return Err(Error::MatrixMarket(
                "complex matrices are not supported".into(),
            ));
        }
        "pattern" => {
            return Err(Error::MatrixMarket(
                "pattern matrices are not supported".into(),
            ));
        }
        other => {
            return Err(Error::MatrixMarket(format!("unsupported field '{other}'")));
        }
    }
    let symmetry = match fields[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        other => {
            return Err(Error::MatrixMarket(format!(
                "unsupported symmetry '{other}'"
            )));
        }
    };
    Ok((layout, symmetry))
}

fn parse_dim(s: &str) -> Result<usize> {
    let v: i64 = s
        .parse()
        .map_err(|_| Error::MatrixMarket(format!("cannot parse dimension '{s}'")))?;
    if v < 1 {
        return Err(Error::MatrixMarket(format!(
            "dimensions must be positive, got {v}"
        )));
    }
    Ok(v as usize)
}

fn parse_value(s: &str) -> Result<f64> {
    s.parse()
        .map_err(|_| Error::MatrixMarket(format!("cannot parse value '{s}'")))
}

fn read_array(
    lines: &mut impl Iterator<Item = Result<String>>,
    rows: usize,
    cols: usize,
    symmetry: Symmetry,
) -> Result<DenseMatrix> {
    if symmetry == Symmetry::Symmetric && rows != cols {
        return Err(Error::MatrixMarket(
            "symmetric matrices must be square".into(),
        ));
    }
    let mut data = vec![0.0; rows * cols];
    let mut values = lines.flat_map(|line| match line {
        Ok(l) => l
            .split_whitespace()
            .map(|tok| parse_value(tok))
            .collect::<Vec<_>>(),
        Err(e) => vec![Err(e)],
    });
    // Column-major traversal; symmetric files store the lower triangle.
    for j in 0..cols {
        let start = if symmetry == Symmetry::Symmetric { j } else { 0 };
        for i in start..rows {
            let v = values
                .next()
                .ok_or_else(|| Error::MatrixMarket("fewer values than the size line promises".into()))??;
            data[i * cols + j] = v;
            if symmetry == Symmetry::Symmetric {
                data[j * cols + i] = v;
            }
        }
    }
    if values.next().is_some() {
        return Err(Error::MatrixMarket(
            "more values than the size line promises".into(),
        ));
    }
    DenseMatrix::from_vec(rows, cols, data)
}

fn read_coordinate(
    lines: &mut impl Iterator<Item = Result<String>>,
    rows: usize,
    cols: usize,
    nnz: usize,
    symmetry: Symmetry,
) -> Result<DenseMatrix> {
    if symmetry == Symmetry::Symmetric && rows != cols {
        return Err(Error::MatrixMarket(
            "symmetric matrices must be square".into(),
        ));
    }
    let mut data = vec![0.0; rows * cols];
    let mut seen = 0usize;
    for line in lines {
        let line = line?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 3 {
            return Err(Error::MatrixMarket(format!(
                "coordinate entry must be 'i j value', got '{line}'"
            )));
        }
        let i = parse_dim(toks[0])? - 1;
        let j = parse_dim(toks[1])? - 1;
        let v = parse_value(toks[2])?;
        if i >= rows || j >= cols {
            return Err(Error::MatrixMarket(format!(
                "index ({}, {}) outside {}x{}",
                i + 1,
                j + 1,
                rows,
                cols
            )));
        }
        // Duplicates accumulate, the usual assembly convention.
        data[i * cols + j] += v;
        if symmetry == Symmetry::Symmetric && i != j {
            data[j * cols + i] += v;
        }
        seen += 1;
        if seen > nnz {
            return Err(Error::MatrixMarket(
                "more entries than the size line promises".into(),
            ));
        }
    }
    if seen != nnz {
        return Err(Error::MatrixMarket(format!(
            "expected {nnz} entries, found {seen}"
        )));
    }
    DenseMatrix::from_vec(rows, cols, data)
}
