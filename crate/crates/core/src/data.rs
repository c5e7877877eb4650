//! CSV ingestion.
//!
//! Files must have a header row. Every cell is parsed as `f64`; the first
//! non-numeric or blank cell aborts the load with its (1-based data) row and
//! column name.

use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{KereError, Result};

/// Which column holds the response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ResponseColumn {
    Name(String),
    Index(usize),
}

impl FromStr for ResponseColumn {
    type Err = std::convert::Infallible;

    /// Digits are read as an index; anything else as a name. A header that
    /// is literally a number can still be chosen via [`ResponseColumn::Name`].
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => ResponseColumn::Index(i),
            Err(_) => ResponseColumn::Name(s.to_string()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub path: String,
    pub response_column: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    pub response_name: String,
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }
}

/// Header plus a row-major table of every cell.
pub fn read_numeric_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    if !path.exists() {
        return Err(KereError::Data(format!(
            "file not found: {}",
            path.display()
        )));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(KereError::Data(format!(
            "{}: missing header row",
            path.display()
        )));
    }
    let mut rows = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != header.len() {
            return Err(KereError::Data(format!(
                "row {}: expected {} cells, found {}",
                r + 1,
                header.len(),
                record.len()
            )));
        }
        let row = record
            .iter()
            .zip(&header)
            .map(|(cell, name)| {
                let v: f64 = cell.parse().map_err(|_| {
                    KereError::Data(format!(
                        "row {}, column `{name}`: non-numeric cell {cell:?}",
                        r + 1
                    ))
                })?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(KereError::Data(format!(
                        "row {}, column `{name}`: non-finite value",
                        r + 1
                    )))
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(KereError::Data(format!("{}: no data rows", path.display())));
    }
    Ok((header, rows))
}

fn resolve(header: &[String], response: &ResponseColumn) -> Result<usize> {
    match response {
        ResponseColumn::Name(name) => header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| KereError::Data(format!("response column `{name}` not found"))),
        ResponseColumn::Index(i) => {
            if *i < header.len() {
                Ok(*i)
            } else {
                Err(KereError::Data(format!(
                    "response index {i} out of range ({} columns)",
                    header.len()
                )))
            }
        }
    }
}

/// Loads features and response; features keep their file order.
pub fn load_csv(path: impl AsRef<Path>, response: &ResponseColumn) -> Result<Dataset> {
    let path = path.as_ref();
    let (header, rows) = read_numeric_csv(path)?;
    let target = resolve(&header, response)?;
    if header.len() < 2 {
        return Err(KereError::Data(
            "need at least one feature column besides the response".into(),
        ));
    }
    let features: Vec<usize> = (0..header.len()).filter(|&j| j != target).collect();
    let n = rows.len();
    let x = DMatrix::from_fn(n, features.len(), |i, j| rows[i][features[j]]);
    let y = DVector::from_fn(n, |i, _| rows[i][target]);
    Ok(Dataset {
        feature_names: features.iter().map(|&j| header[j].clone()).collect(),
        response_name: header[target].clone(),
        x,
        y,
        provenance: Provenance {
            path: path.display().to_string(),
            response_column: target,
        },
    })
}

/// Loads a feature matrix whose columns are selected by `names`; when the
/// file lacks any of them it must have exactly `names.len()` columns, taken
/// in order.
pub fn load_features(path: impl AsRef<Path>, names: &[String]) -> Result<DMatrix<f64>> {
    let (header, rows) = read_numeric_csv(path.as_ref())?;
    let cols: Vec<usize> = match names
        .iter()
        .map(|n| header.iter().position(|h| h == n))
        .collect::<Option<Vec<_>>>()
    {
        Some(c) => c,
        None if header.len() == names.len() => (0..header.len()).collect(),
        None => {
            return Err(KereError::DimensionMismatch {
                context: "prediction features",
                expected: names.len(),
                actual: header.len(),
            })
        }
    };
    Ok(DMatrix::from_fn(rows.len(), cols.len(), |i, j| {
        rows[i][cols[j]]
    }))
}
