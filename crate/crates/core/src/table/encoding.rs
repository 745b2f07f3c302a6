use serde::{Deserialize, Serialize};

use super::{Column, ColumnKind, DataTable, Values};
use crate::error::{Error, Result};

/// Injective category → positive integer code mapping for one column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodingMap {
    pub column: String,
    mapping: Vec<(String, u32)>,
}

impl EncodingMap {
    pub fn new(column: impl Into<String>, mapping: Vec<(String, u32)>) -> Result<Self> {
        let column = column.into();
        for (i, (cat, code)) in mapping.iter().enumerate() {
            if *code == 0 {
                return Err(Error::Config(format!("{column}: code for {cat:?} must be positive")));
            }
            for (other_cat, other_code) in &mapping[..i] {
                if other_cat == cat || other_code == code {
                    return Err(Error::Config(format!(
                        "{column}: mapping is not injective ({other_cat:?}/{cat:?})"
                    )));
                }
            }
        }
        Ok(EncodingMap { column, mapping })
    }

    /// Codes 1..=k in sorted order of the observed categories.
    pub fn from_observed(column: &Column) -> Result<Self> {
        let cells = column
            .as_text()
            .ok_or_else(|| Error::Schema(format!("column {} is not categorical", column.name)))?;
        let mut cats: Vec<&String> = cells.iter().flatten().collect();
        cats.sort();
        cats.dedup();
        let mapping = cats
            .into_iter()
            .enumerate()
            .map(|(i, c)| (c.clone(), i as u32 + 1))
            .collect();
        EncodingMap::new(column.name.clone(), mapping)
    }

    /// Male = 1, Female = 2.
    pub fn gender(column: impl Into<String>) -> Self {
        EncodingMap::new(column, vec![("Male".into(), 1), ("Female".into(), 2)])
            .expect("static map is injective")
    }

    /// CN = 1, SMC = 2, EMCI = 3, LMCI = 4, AD = 5.
    pub fn diagnosis(column: impl Into<String>) -> Self {
        let levels = ["CN", "SMC", "EMCI", "LMCI", "AD"];
        EncodingMap::new(
            column,
            levels
                .iter()
                .enumerate()
                .map(|(i, l)| (l.to_string(), i as u32 + 1))
                .collect(),
        )
        .expect("static map is injective")
    }

    pub fn entries(&self) -> &[(String, u32)] {
        &self.mapping
    }

    pub fn code(&self, category: &str) -> Option<u32> {
        self.mapping.iter().find(|(c, _)| c == category).map(|(_, k)| *k)
    }

    pub fn category(&self, code: u32) -> Option<&str> {
        self.mapping.iter().find(|(_, k)| *k == code).map(|(c, _)| c.as_str())
    }
}

/// Replaces every mapped text column with its integer codes. Label columns
/// keep their kind; all others become numeric.
pub fn encode_categorical(table: &DataTable, maps: &[EncodingMap]) -> Result<DataTable> {
    let mut out = table.clone();
    for map in maps {
        let column = table.require(&map.column)?;
        let cells = column.as_text().ok_or_else(|| {
            Error::Schema(format!("column {} is already numeric", column.name))
        })?;
        let codes = cells
            .iter()
            .map(|cell| match cell {
                None => Ok(None),
                Some(cat) => map.code(cat).map(|k| Some(k as f64)).ok_or_else(|| Error::Encoding {
                    column: column.name.clone(),
                    category: cat.clone(),
                }),
            })
            .collect::<Result<Vec<_>>>()?;
        let kind = match column.kind {
            ColumnKind::Label => ColumnKind::Label,
            _ => ColumnKind::Numeric,
        };
        out = out.replace_column(Column {
            name: column.name.clone(),
            kind,
            values: Values::Numeric(codes),
        })?;
    }
    Ok(out)
}

/// Inverse of [`encode_categorical`] for one column.
pub fn decode_categorical(table: &DataTable, map: &EncodingMap) -> Result<DataTable> {
    let column = table.require(&map.column)?;
    let cells = column.numeric_values()?;
    let text = cells
        .iter()
        .map(|cell| match cell {
            None => Ok(None),
            Some(v) => {
                let code = (v.fract() == 0.0 && *v >= 1.0).then_some(*v as u32);
                code.and_then(|k| map.category(k))
                    .map(|c| Some(c.to_string()))
                    .ok_or_else(|| Error::Encoding {
                        column: column.name.clone(),
                        category: v.to_string(),
                    })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let kind = match column.kind {
        ColumnKind::Label => ColumnKind::Label,
        _ => ColumnKind::Categorical,
    };
    table.replace_column(Column {
        name: column.name.clone(),
        kind,
        values: Values::Text(text),
    })
}
