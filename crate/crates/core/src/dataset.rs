//! Dense column-major views of a fully observed table, as consumed by the
//! learners.

use crate::error::{Error, Result};
use crate::table::{Column, ColumnKind, DataTable};

/// Class codes are positive integers `1..=n_classes`.
pub type ClassCode = u32;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    n_rows: usize,
}

impl FeatureMatrix {
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::Schema("feature names and columns differ in length".into()));
        }
        let n_rows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != n_rows) {
            return Err(Error::Schema("feature columns differ in length".into()));
        }
        Ok(FeatureMatrix {
            names,
            columns,
            n_rows,
        })
    }

    /// Builds a matrix from rows (row-major input).
    pub fn from_rows(names: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let p = names.len();
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::Schema("row width does not match feature count".into()));
        }
        let columns = (0..p).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
        let mut m = FeatureMatrix::new(names, columns)?;
        m.n_rows = rows.len();
        Ok(m)
    }

    pub fn from_table(table: &DataTable, names: &[String]) -> Result<Self> {
        let columns = names
            .iter()
            .map(|n| table.require(n)?.dense())
            .collect::<Result<Vec<_>>>()?;
        let mut m = FeatureMatrix::new(names.to_vec(), columns)?;
        m.n_rows = table.row_count();
        Ok(m)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    #[inline]
    pub fn get(&self, row: usize, feature: usize) -> f64 {
        self.columns[feature][row]
    }

    pub fn row(&self, r: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[r]).collect()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n_rows).map(|r| self.row(r)).collect()
    }

    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            names: self.names.clone(),
            columns: self.columns.iter().map(|c| rows.iter().map(|&r| c[r]).collect()).collect(),
            n_rows: rows.len(),
        }
    }
}

/// Converts a numeric column of positive integer codes into class labels.
pub fn class_codes(column: &Column) -> Result<Vec<ClassCode>> {
    column
        .dense()?
        .into_iter()
        .map(|v| {
            if v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                Ok(v as ClassCode)
            } else {
                Err(Error::Schema(format!(
                    "column {}: {v} is not a positive integer class code",
                    column.name
                )))
            }
        })
        .collect()
}

/// Features plus class labels for a classification problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: FeatureMatrix,
    pub labels: Vec<ClassCode>,
    pub n_classes: u32,
}

impl Dataset {
    pub fn new(features: FeatureMatrix, labels: Vec<ClassCode>) -> Result<Self> {
        if features.n_rows() != labels.len() {
            return Err(Error::Schema("label count does not match row count".into()));
        }
        if labels.contains(&0) {
            return Err(Error::Schema("class codes start at 1".into()));
        }
        let n_classes = labels.iter().copied().max().unwrap_or(0);
        Ok(Dataset {
            features,
            labels,
            n_classes,
        })
    }

    /// Uses every numeric non-label column (plus whitelisted identifiers) as a
    /// feature and the table's label column as the target.
    pub fn from_table(table: &DataTable, whitelist: &[String]) -> Result<Self> {
        let names = feature_names(table, whitelist);
        Self::from_table_with(table, &names)
    }

    pub fn from_table_with(table: &DataTable, names: &[String]) -> Result<Self> {
        let features = FeatureMatrix::from_table(table, names)?;
        let labels = class_codes(table.label()?)?;
        Dataset::new(features, labels)
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn with_n_classes(mut self, n_classes: u32) -> Self {
        self.n_classes = self.n_classes.max(n_classes);
        self
    }

    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(rows),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            n_classes: self.n_classes,
        }
    }
}

/// Names of the columns that count as model features.
pub fn feature_names(table: &DataTable, whitelist: &[String]) -> Vec<String> {
    table
        .columns()
        .iter()
        .filter(|c| c.is_feature(whitelist) && (c.kind != ColumnKind::Categorical))
        .map(|c| c.name.clone())
        .collect()
}
