//! Data containers and file formats.
//!
//! A [`Dataset`] couples a binary covariate matrix with a continuous
//! response and, optionally, non-binary fixed covariates (age and the like)
//! that enter every model untransformed. Simulated datasets may also carry
//! the generating ground truth, which is written to a sidecar file rather
//! than the CSV itself.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::expr::{self, LogicTree};

/// Column-major matrix of 0/1 values.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMatrix {
    n: usize,
    columns: Vec<Vec<u8>>,
}

impl BinaryMatrix {
    /// Build from columns, checking equal lengths and 0/1 entries.
    pub fn from_columns(columns: Vec<Vec<u8>>) -> Result<BinaryMatrix> {
        let n = columns.first().map_or(0, |c| c.len());
        for (j, col) in columns.iter().enumerate() {
            if col.len() != n {
                return Err(Error::ShapeMismatch {
                    what: format!("column {} has {} rows, expected {}", j + 1, col.len(), n),
                });
            }
            for (i, &v) in col.iter().enumerate() {
                if v > 1 {
                    return Err(Error::NotBinary {
                        row: i,
                        column: j,
                        value: v as f64,
                    });
                }
            }
        }
        Ok(BinaryMatrix { n, columns })
    }

    /// Build from rows (each inner vector is one observation).
    pub fn from_rows(rows: &[Vec<u8>]) -> Result<BinaryMatrix> {
        let p = rows.first().map_or(0, |r| r.len());
        let mut columns = vec![Vec::with_capacity(rows.len()); p];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(Error::ShapeMismatch {
                    what: format!("row {} has {} entries, expected {}", i + 1, row.len(), p),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                columns[j].push(v);
            }
        }
        BinaryMatrix::from_columns(columns)
    }

    /// Number of rows.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of columns.
    pub fn p(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &[u8] {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[Vec<u8>] {
        &self.columns
    }
}

/// A non-binary covariate included in models as-is.
#[derive(Clone, Debug, PartialEq)]
pub struct FixedCovariate {
    pub name: String,
    pub values: Vec<f64>,
}

/// The expressions (and fixed covariates) a simulated response was built from.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub trees: Vec<LogicTree>,
    pub fixed: Vec<String>,
}

/// Covariates plus response, with optional simulation ground truth.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub x: BinaryMatrix,
    pub x_names: Vec<String>,
    pub fixed: Vec<FixedCovariate>,
    pub y: Vec<f64>,
    pub response_name: String,
    pub truth: Option<GroundTruth>,
}

impl Dataset {
    /// Minimal constructor: binary covariates named X1..Xp plus a response.
    pub fn new(x: BinaryMatrix, y: Vec<f64>) -> Result<Dataset> {
        if x.n() == 0 {
            return Err(Error::ShapeMismatch {
                what: "dataset needs at least one row".to_string(),
            });
        }
        if y.len() != x.n() {
            return Err(Error::ShapeMismatch {
                what: format!("{} response values for {} rows", y.len(), x.n()),
            });
        }
        let x_names = (1..=x.p()).map(|j| format!("X{j}")).collect();
        Ok(Dataset {
            x,
            x_names,
            fixed: Vec::new(),
            y,
            response_name: "Y".to_string(),
            truth: None,
        })
    }

    /// Attach fixed covariates, checking row counts and name clashes.
    pub fn with_fixed(mut self, fixed: Vec<FixedCovariate>) -> Result<Dataset> {
        for f in &fixed {
            if f.values.len() != self.n() {
                return Err(Error::ShapeMismatch {
                    what: format!(
                        "fixed covariate {:?} has {} values for {} rows",
                        f.name,
                        f.values.len(),
                        self.n()
                    ),
                });
            }
            if f.name == self.response_name || self.x_names.contains(&f.name) {
                return Err(Error::Config {
                    what: format!(
                        "fixed covariate name {:?} collides with another column",
                        f.name
                    ),
                });
            }
        }
        self.fixed = fixed;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.x.n()
    }

    /// Number of binary covariate columns.
    pub fn p(&self) -> usize {
        self.x.p()
    }

    /// Split the rows into a leading part of `n_head` rows and the rest,
    /// e.g. a train/test split. Names, fixed covariates, and any ground
    /// truth are carried into both parts.
    pub fn split_at_row(&self, n_head: usize) -> Result<(Dataset, Dataset)> {
        if n_head == 0 || n_head >= self.n() {
            return Err(Error::Config {
                what: format!("split point {n_head} outside 1..{} rows", self.n()),
            });
        }
        let part = |range: std::ops::Range<usize>| -> Result<Dataset> {
            let columns: Vec<Vec<u8>> = self
                .x
                .columns()
                .iter()
                .map(|c| c[range.clone()].to_vec())
                .collect();
            let fixed = self
                .fixed
                .iter()
                .map(|f| FixedCovariate {
                    name: f.name.clone(),
                    values: f.values[range.clone()].to_vec(),
                })
                .collect();
            Ok(Dataset {
                x: BinaryMatrix::from_columns(columns)?,
                x_names: self.x_names.clone(),
                fixed,
                y: self.y[range].to_vec(),
                response_name: self.response_name.clone(),
                truth: self.truth.clone(),
            })
        };
        Ok((part(0..n_head)?, part(n_head..self.n())?))
    }

    pub fn n_fixed(&self) -> usize {
        self.fixed.len()
    }

    pub fn fixed_index(&self, name: &str) -> Option<usize> {
        self.fixed.iter().position(|f| f.name == name)
    }

    /// Write as CSV: binary columns, then fixed covariates, then response.
    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let file = File::create(path)?;
        self.write_csv_to(file)
    }

    pub fn write_csv_to<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.x_names.iter().map(String::as_str).collect();
        for f in &self.fixed {
            header.push(&f.name);
        }
        header.push(&self.response_name);
        w.write_record(&header)?;
        for i in 0..self.n() {
            let mut record: Vec<String> = Vec::with_capacity(header.len());
            for j in 0..self.p() {
                record.push(self.x.column(j)[i].to_string());
            }
            for f in &self.fixed {
                record.push(f.values[i].to_string());
            }
            record.push(self.y[i].to_string());
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Read a CSV written by [`Dataset::write_csv`] or any file of the same
    /// shape. `response` names the response column; `fixed_names` lists the
    /// columns exempt from the 0/1 requirement. Every remaining column must
    /// be binary and becomes part of the covariate matrix, in file order.
    pub fn read_csv<P: AsRef<Path>>(
        path: P,
        response: &str,
        fixed_names: &[String],
    ) -> Result<Dataset> {
        let file = File::open(path)?;
        Dataset::read_csv_from(file, response, fixed_names)
    }

    pub fn read_csv_from<R: Read>(
        reader: R,
        response: &str,
        fixed_names: &[String],
    ) -> Result<Dataset> {
        let mut r = csv::Reader::from_reader(reader);
        let headers: Vec<String> = r.headers()?.iter().map(|h| h.to_string()).collect();
        let response_idx =
            headers
                .iter()
                .position(|h| h == response)
                .ok_or_else(|| Error::UnknownColumn {
                    name: response.to_string(),
                })?;
        let mut fixed_idx = Vec::with_capacity(fixed_names.len());
        for name in fixed_names {
            let idx = headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::UnknownColumn { name: name.clone() })?;
            fixed_idx.push(idx);
        }
        let binary_idx: Vec<usize> = (0..headers.len())
            .filter(|j| *j != response_idx && !fixed_idx.contains(j))
            .collect();

        let mut x_cols: Vec<Vec<u8>> = vec![Vec::new(); binary_idx.len()];
        let mut fixed_cols: Vec<Vec<f64>> = vec![Vec::new(); fixed_idx.len()];
        let mut y = Vec::new();
        for (row, record) in r.records().enumerate() {
            let record = record?;
            let parse_f64 = |idx: usize| -> Result<f64> {
                let field = record.get(idx).unwrap_or("");
                field.trim().parse::<f64>().map_err(|_| Error::Parse {
                    input: field.to_string(),
                    position: 0,
                    reason: format!("row {}, column {:?}: not a number", row + 2, headers[idx]),
                })
            };
            y.push(parse_f64(response_idx)?);
            for (k, &idx) in fixed_idx.iter().enumerate() {
                fixed_cols[k].push(parse_f64(idx)?);
            }
            for (k, &idx) in binary_idx.iter().enumerate() {
                let v = parse_f64(idx)?;
                if v == 0.0 {
                    x_cols[k].push(0);
                } else if v == 1.0 {
                    x_cols[k].push(1);
                } else {
                    return Err(Error::NotBinary {
                        row,
                        column: k,
                        value: v,
                    });
                }
            }
        }
        let x = BinaryMatrix::from_columns(x_cols)?;
        let mut ds = Dataset::new(x, y)?;
        ds.x_names = binary_idx.iter().map(|&j| headers[j].clone()).collect();
        ds.response_name = response.to_string();
        ds.fixed = fixed_idx
            .iter()
            .zip(fixed_cols)
            .map(|(&j, values)| FixedCovariate {
                name: headers[j].clone(),
                values,
            })
            .collect();
        Ok(ds)
    }
}

/// Write a ground-truth sidecar: one `expr` line per generating expression
/// (canonical form) and one `fixed` line per fixed covariate name.
pub fn write_truth_file<P: AsRef<Path>>(truth: &GroundTruth, path: P) -> Result<()> {
    let mut file = File::create(path)?;
    write_truth_to(truth, &mut file)
}

pub fn write_truth_to<W: Write>(truth: &GroundTruth, writer: &mut W) -> Result<()> {
    for tree in &truth.trees {
        writeln!(writer, "expr\t{}", tree.canonical())?;
    }
    for name in &truth.fixed {
        writeln!(writer, "fixed\t{name}")?;
    }
    Ok(())
}

/// Read a sidecar produced by [`write_truth_file`].
pub fn read_truth_file<P: AsRef<Path>>(path: P) -> Result<GroundTruth> {
    let file = File::open(path)?;
    read_truth_from(BufReader::new(file))
}

pub fn read_truth_from<R: BufRead>(reader: R) -> Result<GroundTruth> {
    let mut trees = Vec::new();
    let mut fixed = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (tag, value) = trimmed.split_once('\t').ok_or_else(|| Error::Parse {
            input: line.clone(),
            position: 0,
            reason: format!(
                "line {}: expected 'expr<TAB>...' or 'fixed<TAB>...'",
                lineno + 1
            ),
        })?;
        match tag {
            "expr" => trees.push(expr::parse(value.trim())?),
            "fixed" => fixed.push(value.trim().to_string()),
            _ => {
                return Err(Error::Parse {
                    input: line.clone(),
                    position: 0,
                    reason: format!("line {}: unknown tag {:?}", lineno + 1, tag),
                })
            }
        }
    }
    Ok(GroundTruth { trees, fixed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::LogicTree;

    #[test]
    fn binary_matrix_validates_shape_and_entries() {
        assert!(BinaryMatrix::from_columns(vec![vec![0, 1], vec![1, 0]]).is_ok());
        let err = BinaryMatrix::from_columns(vec![vec![0, 1], vec![1]]).unwrap_err();
        assert!(matches!(err, Error::ShapeMismatch { .. }));
        let err = BinaryMatrix::from_columns(vec![vec![0, 2]]).unwrap_err();
        assert!(matches!(
            err,
            Error::NotBinary {
                row: 1,
                column: 0,
                ..
            }
        ));
    }

    #[test]
    fn from_rows_transposes() {
        let m = BinaryMatrix::from_rows(&[vec![0, 1], vec![1, 1], vec![0, 0]]).unwrap();
        assert_eq!(m.n(), 3);
        assert_eq!(m.p(), 2);
        assert_eq!(m.column(0), &[0, 1, 0]);
        assert_eq!(m.column(1), &[1, 1, 0]);
    }

    fn sample_dataset() -> Dataset {
        let x = BinaryMatrix::from_columns(vec![vec![0, 1, 1, 0], vec![1, 1, 0, 0]]).unwrap();
        let y = vec![0.5, -1.25, 3.0, 0.0];
        Dataset::new(x, y)
            .unwrap()
            .with_fixed(vec![FixedCovariate {
                name: "age".to_string(),
                values: vec![30.0, 41.0, 27.0, 34.0],
            }])
            .unwrap()
    }

    #[test]
    fn csv_round_trip_preserves_everything() {
        let ds = sample_dataset();
        let mut buf = Vec::new();
        ds.write_csv_to(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("X1,X2,age,Y\n"));
        let back = Dataset::read_csv_from(&buf[..], "Y", &["age".to_string()]).unwrap();
        assert_eq!(back.x, ds.x);
        assert_eq!(back.x_names, ds.x_names);
        assert_eq!(back.y, ds.y);
        assert_eq!(back.fixed, ds.fixed);
    }

    #[test]
    fn read_csv_reports_missing_response_column() {
        let ds = sample_dataset();
        let mut buf = Vec::new();
        ds.write_csv_to(&mut buf).unwrap();
        let err = Dataset::read_csv_from(&buf[..], "Z", &[]).unwrap_err();
        match err {
            Error::UnknownColumn { name } => assert_eq!(name, "Z"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn read_csv_rejects_non_binary_covariates() {
        // "age" not declared fixed, so its values must be 0/1
        let ds = sample_dataset();
        let mut buf = Vec::new();
        ds.write_csv_to(&mut buf).unwrap();
        let err = Dataset::read_csv_from(&buf[..], "Y", &[]).unwrap_err();
        assert!(matches!(err, Error::NotBinary { .. }));
    }

    #[test]
    fn truth_sidecar_round_trips() {
        let truth = GroundTruth {
            trees: vec![
                crate::expr::parse("(X5&X9)").unwrap(),
                crate::expr::parse("!(X1&(X2|X3))").unwrap(),
                LogicTree::leaf(36),
            ],
            fixed: vec!["age".to_string()],
        };
        let mut buf = Vec::new();
        write_truth_to(&truth, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            text,
            "expr\t(X5&X9)\nexpr\t!(X1&(X2|X3))\nexpr\tX37\nfixed\tage\n"
        );
        let back = read_truth_from(&buf[..]).unwrap();
        assert_eq!(back, truth);
    }

    #[test]
    fn truth_sidecar_rejects_unknown_tags() {
        let err = read_truth_from("tree\tX1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
    }

    #[test]
    fn dataset_new_checks_lengths() {
        let x = BinaryMatrix::from_columns(vec![vec![0, 1]]).unwrap();
        assert!(Dataset::new(x.clone(), vec![1.0]).is_err());
        assert!(Dataset::new(x, vec![1.0, 2.0]).is_ok());
    }

    #[test]
    fn with_fixed_rejects_name_collisions_and_bad_lengths() {
        let x = BinaryMatrix::from_columns(vec![vec![0, 1]]).unwrap();
        let ds = Dataset::new(x, vec![1.0, 2.0]).unwrap();
        let err = ds
            .clone()
            .with_fixed(vec![FixedCovariate {
                name: "X1".to_string(),
                values: vec![1.0, 2.0],
            }])
            .unwrap_err();
        assert!(matches!(err, Error::Config { .. }));
        let err = ds
            .with_fixed(vec![FixedCovariate {
                name: "age".to_string(),
                values: vec![1.0],
            }])
            .unwrap_err();
        assert!(matches!(err, Error::ShapeMismatch { .. }));
    }

    #[test]
    fn split_at_row_partitions_rows_and_keeps_metadata() {
        let x = BinaryMatrix::from_columns(vec![vec![0, 1, 1, 0], vec![1, 1, 0, 0]]).unwrap();
        let ds = Dataset::new(x, vec![1.0, 2.0, 3.0, 4.0])
            .unwrap()
            .with_fixed(vec![FixedCovariate {
                name: "age".to_string(),
                values: vec![30.0, 31.0, 32.0, 33.0],
            }])
            .unwrap();
        let (head, tail) = ds.split_at_row(3).unwrap();
        assert_eq!((head.n(), tail.n()), (3, 1));
        assert_eq!(head.x.column(0), &[0, 1, 1]);
        assert_eq!(tail.x.column(1), &[0]);
        assert_eq!(tail.y, vec![4.0]);
        assert_eq!(head.fixed[0].values, vec![30.0, 31.0, 32.0]);
        assert_eq!(tail.fixed[0].name, "age");
        assert_eq!(head.x_names, ds.x_names);
        assert!(ds.split_at_row(0).is_err());
        assert!(ds.split_at_row(4).is_err());
    }
}
