use serde::{Deserialize, Serialize};

use super::{Column, DataTable, Values};
use crate::error::{Error, Result};

/// Observed extremes of one column, used for `(x - x_min) / (x_max - x_min)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub column: String,
    pub x_min: f64,
    pub x_max: f64,
}

impl ScalingParams {
    pub fn is_degenerate(&self) -> bool {
        self.x_max <= self.x_min
    }

    pub fn scale(&self, x: f64) -> f64 {
        (x - self.x_min) / (self.x_max - self.x_min)
    }
}

pub fn fit_min_max(column: &Column) -> Result<ScalingParams> {
    let values = column.numeric_values()?;
    let mut observed = values.iter().flatten();
    let first = *observed
        .next()
        .ok_or_else(|| Error::Fit(format!("column {} has no observed values", column.name)))?;
    let (x_min, x_max) = observed.fold((first, first), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    Ok(ScalingParams {
        column: column.name.clone(),
        x_min,
        x_max,
    })
}

/// Applies the scaling without clamping; missing cells pass through.
pub fn apply_min_max(column: &Column, params: &ScalingParams) -> Result<Column> {
    if params.is_degenerate() {
        return Err(Error::DegenerateScale(params.column.clone()));
    }
    let values = column.numeric_values()?;
    Ok(Column {
        name: column.name.clone(),
        kind: column.kind,
        values: Values::Numeric(values.iter().map(|v| v.map(|x| params.scale(x))).collect()),
    })
}

/// Min-max scaling for a set of columns, fitted on one table and applied to
/// others. Constant columns are reported and dropped on apply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub params: Vec<ScalingParams>,
    pub dropped: Vec<String>,
}

impl MinMaxScaler {
    pub fn fit(table: &DataTable, columns: &[String]) -> Result<Self> {
        let mut params = Vec::new();
        let mut dropped = Vec::new();
        for name in columns {
            let p = fit_min_max(table.require(name)?)?;
            if p.is_degenerate() {
                log::warn!("dropping constant column {name} (value {})", p.x_min);
                dropped.push(name.clone());
            } else {
                params.push(p);
            }
        }
        Ok(MinMaxScaler { params, dropped })
    }

    pub fn transform(&self, table: &DataTable) -> Result<DataTable> {
        let mut out = table.drop_columns(&self.dropped);
        for p in &self.params {
            let scaled = apply_min_max(out.require(&p.column)?, p)?;
            out = out.replace_column(scaled)?;
        }
        Ok(out)
    }
}
