//! Model files and dataset assembly from matrix, label and split files.
//!
//! Model layout:
//!
//! ```text
//! kind linear_s2v
//! hyper lambda 0.1
//! matrix W
//! 300 2048
//! ...rows...
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use super::{Hyper, ModelKind, ZslDataset, ZslModel};
use crate::error::{Error, Result};
use crate::matrix_io::{load_lines, load_matrix, read_matrix, write_matrix};
use crate::prototypes::PrototypeSet;

impl ZslModel {
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "kind {}", self.kind)?;
        for (k, v) in &self.hyper {
            writeln!(w, "hyper {k} {v}")?;
        }
        for (name, m) in &self.params {
            writeln!(w, "matrix {name}")?;
            write_matrix(m, &mut w)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let lines: Vec<String> = r.lines().collect::<std::io::Result<_>>()?;
        let mut kind = None;
        let mut hyper = Hyper::new();
        let mut params = std::collections::BTreeMap::new();
        let mut i = 0;
        while i < lines.len() {
            let line = lines[i].trim();
            let loc = format!("model line {}", i + 1);
            i += 1;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            match fields[..] {
                ["kind", k] => kind = Some(k.parse::<ModelKind>()?),
                ["hyper", name, value] => {
                    let v = value.parse::<f64>().map_err(|e| Error::parse(&loc, format!("{e}")))?;
                    hyper.insert(name.to_owned(), v);
                }
                ["matrix", name] => {
                    let header = lines.get(i).ok_or_else(|| Error::parse(&loc, "matrix without header"))?;
                    let rows: usize = header
                        .split_whitespace()
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| Error::parse(&loc, "bad matrix header"))?;
                    let end = i + 1 + rows;
                    if end > lines.len() {
                        return Err(Error::shape(format!("matrix {name}: file ends before {rows} rows")));
                    }
                    let block = lines[i..end].join("\n");
                    params.insert(name.to_owned(), read_matrix(block.as_bytes())?);
                    i = end;
                }
                _ => return Err(Error::parse(loc, format!("unexpected line {line:?}"))),
            }
        }
        let kind = kind.ok_or_else(|| Error::parse("model", "missing `kind` line"))?;
        let model = ZslModel { kind, hyper, params };
        model.dims()?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_text(std::io::BufWriter::new(f))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_text(BufReader::new(f))
    }
}

/// Files making up a dataset. Labels are class ids, one per feature row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetPaths {
    pub features: PathBuf,
    pub labels: PathBuf,
    pub prototypes: PathBuf,
    pub seen: PathBuf,
    pub unseen: PathBuf,
    pub test_features: Option<PathBuf>,
    pub test_labels: Option<PathBuf>,
}

fn label_indices(labels: &[String], classes: &PrototypeSet, what: &str) -> Result<Vec<usize>> {
    labels
        .iter()
        .map(|l| {
            classes
                .position(l)
                .ok_or_else(|| Error::invalid(format!("{what} label {l:?} is not in the class list")))
        })
        .collect()
}

pub fn load_dataset(paths: &DatasetPaths) -> Result<ZslDataset> {
    let protos = PrototypeSet::load(&paths.prototypes)?;
    let seen = protos.select(&load_lines(&paths.seen)?)?;
    let unseen = protos.select(&load_lines(&paths.unseen)?)?;
    let features = load_matrix(&paths.features)?;
    let labels = label_indices(&load_lines(&paths.labels)?, &seen, "training")?;
    let (test_features, test_labels) = match (&paths.test_features, &paths.test_labels) {
        (Some(f), Some(l)) => (load_matrix(f)?, label_indices(&load_lines(l)?, &unseen, "test")?),
        (None, None) => (DMatrix::zeros(0, features.ncols()), Vec::new()),
        _ => return Err(Error::invalid("test features and test labels must be given together")),
    };
    ZslDataset::with_test(features, labels, seen, unseen, test_features, test_labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zsl::testutil::*;
    use crate::zsl::{fit, ModelKind};

    #[test]
    fn every_kind_round_trips() {
        let data = planted(1, 4, 4, 2, 3, 3, 0.2);
        for kind in ModelKind::ALL {
            let m = fit(kind, &data, &Hyper::new(), 1).unwrap();
            let mut buf = Vec::new();
            m.write_text(&mut buf).unwrap();
            assert_eq!(ZslModel::read_text(&buf[..]).unwrap(), m, "{kind}");
        }
    }

    #[test]
    fn malformed_models_are_rejected() {
        assert!(ZslModel::read_text("hyper lambda 1\n".as_bytes()).is_err());
        assert!(ZslModel::read_text("kind linear_s2v\n".as_bytes()).is_err());
        assert!(ZslModel::read_text("kind linear_s2v\nmatrix W\n2 2\n1 2\n".as_bytes()).is_err());
        assert!(ZslModel::read_text("kind sync\n".as_bytes()).is_err());
    }
}
