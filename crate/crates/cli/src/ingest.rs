//! CSV ingestion with row/column-located errors.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub struct Table {
    pub path: PathBuf,
    pub headers: Vec<String>,
    pub rows: Vec<csv::StringRecord>,
    pub sha256: String,
}

impl Table {
    pub fn read(path: &Path) -> Result<Table> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        let sha256 = hex(&Sha256::digest(&bytes));
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(bytes.as_slice());
        let headers: Vec<String> = rdr
            .headers()
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?
            .iter()
            .map(str::to_string)
            .collect();
        let rows = rdr
            .records()
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        Ok(Table {
            path: path.to_path_buf(),
            headers,
            rows,
            sha256,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn require_rows(&self) -> Result<()> {
        if self.rows.is_empty() {
            return Err(CliError::Data(format!(
                "{}: no data rows",
                self.path.display()
            )));
        }
        Ok(())
    }

    pub fn has(&self, name: &str) -> bool {
        self.headers.iter().any(|h| h == name)
    }

    fn index(&self, name: &str) -> Result<usize> {
        self.headers.iter().position(|h| h == name).ok_or_else(|| {
            CliError::Data(format!("{}: missing column '{name}'", self.path.display()))
        })
    }

    fn at(&self, row: usize, name: &str, msg: impl std::fmt::Display) -> CliError {
        CliError::Data(format!(
            "{}: row {}, column '{name}': {msg}",
            self.path.display(),
            row + 1
        ))
    }

    pub fn strings(&self, name: &str) -> Result<Vec<String>> {
        let j = self.index(name)?;
        Ok(self.rows.iter().map(|r| r[j].to_string()).collect())
    }

    pub fn numeric(&self, name: &str) -> Result<Vec<f64>> {
        let j = self.index(name)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| match r[j].parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(self.at(i, name, format!("non-numeric value '{}'", &r[j]))),
            })
            .collect()
    }

    pub fn counts(&self, name: &str) -> Result<Vec<f64>> {
        let v = self.numeric(name)?;
        if let Some(i) = v.iter().position(|c| *c < 0.0 || c.fract() != 0.0) {
            return Err(self.at(
                i,
                name,
                format!("count must be a non-negative integer, got {}", v[i]),
            ));
        }
        Ok(v)
    }

    pub fn positive(&self, name: &str) -> Result<Vec<f64>> {
        let v = self.numeric(name)?;
        if let Some(i) = v.iter().position(|c| !(*c > 0.0)) {
            return Err(self.at(i, name, format!("must be positive, got {}", v[i])));
        }
        Ok(v)
    }

    pub fn coords(&self, x: &str, y: &str) -> Result<Vec<[f64; 2]>> {
        let (xs, ys) = (self.numeric(x)?, self.numeric(y)?);
        Ok(xs.into_iter().zip(ys).map(|(a, b)| [a, b]).collect())
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Zone ids in first-appearance order and each row's zone index.
pub fn zones(ids: &[String]) -> (Vec<String>, Vec<usize>) {
    let mut levels: Vec<String> = Vec::new();
    let index = ids
        .iter()
        .map(|id| match levels.iter().position(|l| l == id) {
            Some(k) => k,
            None => {
                levels.push(id.clone());
                levels.len() - 1
            }
        })
        .collect();
    (levels, index)
}

/// Binary adjacency over `zones` read from an edge list or dense matrix.
pub fn adjacency(path: &Path, format: &str, zones: &[String]) -> Result<DMatrix<f64>> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let dense = format == "dense";
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(dense)
        .trim(csv::Trim::All)
        .from_reader(bytes.as_slice());
    let n = zones.len();
    let find = |id: &str, line: usize| {
        zones.iter().position(|z| z == id).ok_or_else(|| {
            CliError::Data(format!(
                "{}: line {line}: unknown zone '{id}'",
                path.display()
            ))
        })
    };
    let mut a = DMatrix::zeros(n, n);
    if dense {
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?
            .iter()
            .map(str::to_string)
            .collect();
        let cols: Vec<usize> = header.iter().map(|h| find(h, 1)).collect::<Result<_>>()?;
        if cols.len() != n {
            return Err(CliError::Data(format!(
                "{}: {} zones in the matrix, {n} in the data",
                path.display(),
                cols.len()
            )));
        }
        let mut rows = 0;
        for (r, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            if r >= n || rec.len() != n {
                return Err(CliError::Data(format!(
                    "{}: line {}: expected {n} values in an {n}x{n} matrix",
                    path.display(),
                    r + 2
                )));
            }
            for (c, cell) in rec.iter().enumerate() {
                let v: f64 = cell.parse().map_err(|_| {
                    CliError::Data(format!(
                        "{}: line {}, column {}: non-numeric value '{cell}'",
                        path.display(),
                        r + 2,
                        c + 1
                    ))
                })?;
                a[(cols[r], cols[c])] = v;
            }
            rows += 1;
        }
        if rows != n {
            return Err(CliError::Data(format!(
                "{}: {rows} matrix rows for {n} zones",
                path.display()
            )));
        }
    } else {
        for (r, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            if rec.len() != 2 {
                return Err(CliError::Data(format!(
                    "{}: line {}: expected a pair of zone ids",
                    path.display(),
                    r + 1
                )));
            }
            let (i, j) = (find(&rec[0], r + 1)?, find(&rec[1], r + 1)?);
            if i != j {
                a[(i, j)] = 1.0;
                a[(j, i)] = 1.0;
            }
        }
    }
    Ok(a)
}
