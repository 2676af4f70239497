//! Dense-matrix text files.
//!
//! Plain matrices: a `rows cols` header, then one whitespace-separated row
//! per line. Keyed matrices (prototypes, embeddings) put a key before each
//! row. Values are written in shortest round-trip form.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

fn parse_header(line: Option<std::io::Result<String>>, what: &str) -> Result<(usize, usize)> {
    let line = line.ok_or_else(|| Error::parse(what, "missing header"))??;
    let dims: Vec<usize> = line
        .split_whitespace()
        .map(|t| t.parse().map_err(|e| Error::parse(what, format!("header: {e}"))))
        .collect::<Result<_>>()?;
    match dims[..] {
        [r, c] => Ok((r, c)),
        _ => Err(Error::parse(what, "header must be `rows cols`")),
    }
}

fn parse_row<'a>(
    fields: impl Iterator<Item = &'a str>,
    cols: usize,
    loc: &str,
    out: &mut Vec<f64>,
) -> Result<()> {
    let before = out.len();
    for f in fields {
        out.push(
            f.parse::<f64>()
                .map_err(|e| Error::parse(loc, format!("{e}")))?,
        );
    }
    if out.len() - before != cols {
        return Err(Error::shape(format!(
            "{loc}: expected {cols} values, found {}",
            out.len() - before
        )));
    }
    Ok(())
}

pub fn read_matrix<R: BufRead>(r: R) -> Result<DMatrix<f64>> {
    let mut lines = r.lines();
    let (rows, cols) = parse_header(lines.next(), "matrix")?;
    let mut data = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        seen += 1;
        if seen > rows {
            return Err(Error::shape(format!("header declares {rows} rows, found more")));
        }
        parse_row(line.split_whitespace(), cols, &format!("matrix line {}", i + 2), &mut data)?;
    }
    if seen != rows {
        return Err(Error::shape(format!("header declares {rows} rows, found {seen}")));
    }
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}

pub fn write_matrix<W: Write>(m: &DMatrix<f64>, w: W) -> Result<()> {
    let mut w = BufWriter::new(w);
    writeln!(w, "{} {}", m.nrows(), m.ncols())?;
    for row in m.row_iter() {
        let mut first = true;
        for x in row.iter() {
            if !first {
                write!(w, " ")?;
            }
            write!(w, "{x}")?;
            first = false;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_keyed_matrix<R: BufRead>(r: R) -> Result<(Vec<String>, DMatrix<f64>)> {
    let mut lines = r.lines();
    let (rows, cols) = parse_header(lines.next(), "keyed matrix")?;
    let mut keys = Vec::with_capacity(rows);
    let mut data = Vec::with_capacity(rows * cols);
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if keys.len() == rows {
            return Err(Error::shape(format!("header declares {rows} rows, found more")));
        }
        let loc = format!("line {}", i + 2);
        let mut fields = line.split_whitespace();
        let key = fields.next().ok_or_else(|| Error::parse(&loc, "empty row"))?;
        parse_row(fields, cols, &loc, &mut data)?;
        keys.push(key.to_owned());
    }
    if keys.len() != rows {
        return Err(Error::shape(format!("header declares {rows} rows, found {}", keys.len())));
    }
    Ok((keys, DMatrix::from_row_slice(rows, cols, &data)))
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_matrix(BufReader::new(f))
}

pub fn save_matrix(m: &DMatrix<f64>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_matrix(m, f)
}

/// One entry per line (labels, class lists).
pub fn read_lines<R: BufRead>(r: R) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        let t = line.trim();
        if !t.is_empty() {
            out.push(t.to_owned());
        }
    }
    Ok(out)
}

pub fn load_lines(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_lines(BufReader::new(f))
}

pub fn save_lines<S: AsRef<str>>(lines: &[S], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    for l in lines {
        writeln!(w, "{}", l.as_ref())?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_round_trip_is_exact() {
        let m = DMatrix::from_row_slice(2, 3, &[0.1, -2.5e-17, 3.0, 1.0 / 3.0, 0.0, -7.25]);
        let mut buf = Vec::new();
        write_matrix(&m, &mut buf).unwrap();
        assert_eq!(read_matrix(&buf[..]).unwrap(), m);
    }

    #[test]
    fn header_mismatch() {
        assert!(read_matrix("2 2\n1 2\n".as_bytes()).is_err());
        assert!(read_matrix("1 2\n1 2 3\n".as_bytes()).is_err());
        assert!(read_matrix("1\n1\n".as_bytes()).is_err());
    }

    #[test]
    fn keyed() {
        let (keys, m) = read_keyed_matrix("2 2\ngull 1 0\nmorel 0.5 0.25 \n".as_bytes()).unwrap();
        assert_eq!(keys, ["gull", "morel"]);
        assert_eq!(m[(1, 1)], 0.25);
    }
}
