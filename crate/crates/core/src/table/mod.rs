//! Typed in-memory table with explicit per-cell missingness.

mod csv_io;
mod encoding;
mod scaling;
mod schema;

pub use csv_io::{load_csv, read_csv, write_csv, write_csv_file};
pub use encoding::{decode_categorical, encode_categorical, EncodingMap};
pub use scaling::{apply_min_max, fit_min_max, MinMaxScaler, ScalingParams};
pub use schema::Schema;

use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
    /// Record or image identifiers. Never a model feature unless whitelisted.
    Identifier,
    Label,
}

impl ColumnKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ColumnKind::Numeric => "numeric",
            ColumnKind::Categorical => "categorical",
            ColumnKind::Identifier => "identifier",
            ColumnKind::Label => "label",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "numeric" => Some(ColumnKind::Numeric),
            "categorical" => Some(ColumnKind::Categorical),
            "identifier" => Some(ColumnKind::Identifier),
            "label" => Some(ColumnKind::Label),
            _ => None,
        }
    }
}

impl fmt::Display for ColumnKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Cell storage. `None` is a missing cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Values {
    Numeric(Vec<Option<f64>>),
    Text(Vec<Option<String>>),
}

impl Values {
    pub fn len(&self) -> usize {
        match self {
            Values::Numeric(v) => v.len(),
            Values::Text(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_missing(&self, row: usize) -> bool {
        match self {
            Values::Numeric(v) => v[row].is_none(),
            Values::Text(v) => v[row].is_none(),
        }
    }

    pub fn missing_count(&self) -> usize {
        (0..self.len()).filter(|&r| self.is_missing(r)).count()
    }

    fn select(&self, rows: &[usize]) -> Values {
        match self {
            Values::Numeric(v) => Values::Numeric(rows.iter().map(|&r| v[r]).collect()),
            Values::Text(v) => Values::Text(rows.iter().map(|&r| v[r].clone()).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
    pub values: Values,
}

impl Column {
    pub fn numeric(name: impl Into<String>, values: Vec<Option<f64>>) -> Self {
        Column {
            name: name.into(),
            kind: ColumnKind::Numeric,
            values: Values::Numeric(values),
        }
    }

    pub fn categorical(name: impl Into<String>, values: Vec<Option<String>>) -> Self {
        Column {
            name: name.into(),
            kind: ColumnKind::Categorical,
            values: Values::Text(values),
        }
    }

    pub fn with_kind(mut self, kind: ColumnKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn missing_count(&self) -> usize {
        self.values.missing_count()
    }

    pub fn as_numeric(&self) -> Option<&[Option<f64>]> {
        match &self.values {
            Values::Numeric(v) => Some(v),
            Values::Text(_) => None,
        }
    }

    pub fn as_text(&self) -> Option<&[Option<String>]> {
        match &self.values {
            Values::Text(v) => Some(v),
            Values::Numeric(_) => None,
        }
    }

    /// Numeric cells, or an error naming the column if it holds text.
    pub fn numeric_values(&self) -> Result<&[Option<f64>]> {
        self.as_numeric()
            .ok_or_else(|| Error::Schema(format!("column {} is not numeric", self.name)))
    }

    /// Fully observed numeric cells, or an error naming the column.
    pub fn dense(&self) -> Result<Vec<f64>> {
        self.numeric_values()?
            .iter()
            .map(|v| v.ok_or_else(|| Error::Schema(format!("column {} has missing cells", self.name))))
            .collect()
    }

    /// A column is a model feature when it is numeric/categorical, or an
    /// identifier that was explicitly whitelisted.
    pub fn is_feature(&self, whitelist: &[String]) -> bool {
        match self.kind {
            ColumnKind::Numeric | ColumnKind::Categorical => true,
            ColumnKind::Identifier => whitelist.iter().any(|w| w == &self.name),
            ColumnKind::Label => false,
        }
    }
}

/// Ordered, uniquely named columns of equal length.
#[derive(Debug, Clone, PartialEq)]
pub struct DataTable {
    columns: Vec<Column>,
    row_count: usize,
}

impl DataTable {
    pub fn new(columns: Vec<Column>) -> Result<Self> {
        let row_count = columns.first().map_or(0, Column::len);
        Self::with_row_count(columns, row_count)
    }

    /// Like [`DataTable::new`] but fixes the row count, so a table with no
    /// columns can still carry rows.
    pub fn with_row_count(columns: Vec<Column>, row_count: usize) -> Result<Self> {
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column name {}", c.name)));
            }
            if c.len() != row_count {
                return Err(Error::Schema(format!(
                    "column {} has {} cells, expected {}",
                    c.name,
                    c.len(),
                    row_count
                )));
            }
        }
        Ok(DataTable { columns, row_count })
    }

    pub fn row_count(&self) -> usize {
        self.row_count
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn into_columns(self) -> Vec<Column> {
        self.columns
    }

    pub fn names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn schema(&self) -> Schema {
        Schema::new(self.columns.iter().map(|c| (c.name.clone(), c.kind)).collect())
            .expect("table column names are unique")
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn require(&self, name: &str) -> Result<&Column> {
        self.column(name)
            .ok_or_else(|| Error::Schema(format!("no column named {name}")))
    }

    /// The single label column.
    pub fn label(&self) -> Result<&Column> {
        let mut labels = self.columns.iter().filter(|c| c.kind == ColumnKind::Label);
        match (labels.next(), labels.next()) {
            (Some(c), None) => Ok(c),
            (None, _) => Err(Error::Schema("table has no label column".into())),
            (Some(_), Some(_)) => Err(Error::Schema("table has more than one label column".into())),
        }
    }

    pub fn total_missing(&self) -> usize {
        self.columns.iter().map(Column::missing_count).sum()
    }

    /// Replaces the column with the same name, keeping its position.
    pub fn replace_column(&self, column: Column) -> Result<DataTable> {
        let idx = self
            .index_of(&column.name)
            .ok_or_else(|| Error::Schema(format!("no column named {}", column.name)))?;
        let mut columns = self.columns.clone();
        columns[idx] = column;
        DataTable::with_row_count(columns, self.row_count)
    }

    pub fn drop_columns(&self, names: &[String]) -> DataTable {
        let columns = self
            .columns
            .iter()
            .filter(|c| !names.contains(&c.name))
            .cloned()
            .collect();
        DataTable {
            columns,
            row_count: self.row_count,
        }
    }

    /// New table with the given rows, in the given order. Repeats are allowed.
    pub fn select_rows(&self, rows: &[usize]) -> DataTable {
        let columns = self
            .columns
            .iter()
            .map(|c| Column {
                name: c.name.clone(),
                kind: c.kind,
                values: c.values.select(rows),
            })
            .collect();
        DataTable {
            columns,
            row_count: rows.len(),
        }
    }
}
