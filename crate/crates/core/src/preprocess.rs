//! Cleaning stages applied before modeling: missing-data drops, forest
//! imputation, IQR outlier replacement, uniform-feature pruning, encoding
//! and optional scaling.

use serde::{Deserialize, Serialize};

use crate::dataset::{class_codes, Dataset, FeatureMatrix};
use crate::error::{in_stage, Error, Result};
use crate::forest::{train_forest, train_regression_forest, ForestConfig};
use crate::rng::derive_seed;
use crate::stats::{quantile_sorted, sorted};
use crate::table::{
    encode_categorical, Column, ColumnKind, DataTable, EncodingMap, MinMaxScaler, Values,
};

/// Columns subject to cleaning: everything except identifiers and the label.
fn is_feature_kind(kind: ColumnKind) -> bool {
    matches!(kind, ColumnKind::Numeric | ColumnKind::Categorical)
}

fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMissingness {
    pub column: String,
    pub missing: usize,
    pub fraction: f64,
}

/// Column view over every column; row view over feature cells only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingnessProfile {
    pub row_count: usize,
    pub columns: Vec<ColumnMissingness>,
    pub row_missing: Vec<usize>,
}

impl MissingnessProfile {
    pub fn fraction(&self, column: &str) -> Option<f64> {
        self.columns.iter().find(|c| c.column == column).map(|c| c.fraction)
    }

    pub fn to_csv(&self) -> Result<String> {
        csv_string(
            &["column", "missing", "fraction"],
            self.columns
                .iter()
                .map(|c| vec![c.column.clone(), c.missing.to_string(), c.fraction.to_string()]),
        )
    }
}

fn row_missing_counts(table: &DataTable) -> Vec<usize> {
    let mut counts = vec![0; table.row_count()];
    for c in table.columns().iter().filter(|c| is_feature_kind(c.kind)) {
        for (r, n) in counts.iter_mut().enumerate() {
            *n += c.values.is_missing(r) as usize;
        }
    }
    counts
}

pub fn profile_missingness(table: &DataTable) -> MissingnessProfile {
    let n = table.row_count();
    let columns = table
        .columns()
        .iter()
        .map(|c| {
            let missing = c.missing_count();
            ColumnMissingness {
                column: c.name.clone(),
                missing,
                fraction: if n == 0 { 0.0 } else { missing as f64 / n as f64 },
            }
        })
        .collect();
    MissingnessProfile {
        row_count: n,
        columns,
        row_missing: row_missing_counts(table),
    }
}

/// Drops feature columns whose missing fraction exceeds `threshold`.
/// Label and identifier columns are always kept.
pub fn drop_high_missing_columns(table: &DataTable, threshold: f64) -> Result<(DataTable, Vec<String>)> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::Config(format!("missing-column threshold must lie in (0, 1], got {threshold}")));
    }
    let n = table.row_count().max(1) as f64;
    let dropped: Vec<String> = table
        .columns()
        .iter()
        .filter(|c| is_feature_kind(c.kind) && c.missing_count() as f64 / n > threshold)
        .map(|c| c.name.clone())
        .collect();
    Ok((table.drop_columns(&dropped), dropped))
}

/// Removes rows with more than `max_missing` missing feature cells.
pub fn drop_sparse_records(table: &DataTable, max_missing: usize) -> DataTable {
    let keep: Vec<usize> = row_missing_counts(table)
        .into_iter()
        .enumerate()
        .filter(|&(_, m)| m <= max_missing)
        .map(|(r, _)| r)
        .collect();
    table.select_rows(&keep)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImputeConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// `None` uses every predictor at each split.
    pub features_per_split: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ImputeConfig {
    fn default() -> Self {
        ImputeConfig {
            n_trees: 50,
            max_depth: 12,
            min_samples_leaf: 10,
            features_per_split: None,
            bootstrap: true,
        }
    }
}

impl ImputeConfig {
    fn forest(&self, p: usize, seed: u64) -> ForestConfig {
        let mut f = ForestConfig {
            n_trees: self.n_trees,
            features_per_split: Some(self.features_per_split.unwrap_or(p).min(p.max(1))),
            bootstrap: self.bootstrap,
            bootstrap_size: None,
            seed,
            ..ForestConfig::default()
        };
        f.tree.max_depth = self.max_depth;
        f.tree.min_samples_leaf = self.min_samples_leaf;
        f
    }
}

/// Dense numeric view of a complete column; text categories become their
/// sorted-order codes.
fn predictor_values(c: &Column) -> Result<Vec<f64>> {
    match &c.values {
        Values::Numeric(_) => c.dense(),
        Values::Text(cells) => {
            let map = EncodingMap::from_observed(c)?;
            Ok(cells
                .iter()
                .map(|v| map.code(v.as_deref().unwrap_or_default()).unwrap_or(0) as f64)
                .collect())
        }
    }
}

/// Fills missing feature cells one column at a time, least-missing first.
/// Each column is predicted by a forest over the columns that are complete
/// at that point (the label included, identifiers excluded). Observed cells
/// are never changed.
pub fn impute_random_forest(table: &DataTable, config: &ImputeConfig, seed: u64) -> Result<DataTable> {
    let mut order: Vec<(usize, usize)> = table
        .columns()
        .iter()
        .enumerate()
        .filter(|(_, c)| is_feature_kind(c.kind) && c.missing_count() > 0)
        .map(|(j, c)| (c.missing_count(), j))
        .collect();
    order.sort();
    let mut out = table.clone();
    for (_, j) in order {
        let target = out.columns()[j].clone();
        let predictors: Vec<&Column> = out
            .columns()
            .iter()
            .enumerate()
            .filter(|&(i, c)| {
                i != j && c.kind != ColumnKind::Identifier && !c.is_empty() && c.missing_count() == 0
            })
            .map(|(_, c)| c)
            .collect();
        if predictors.is_empty() {
            return Err(Error::Imputation(format!(
                "no complete predictor columns for {}; median-impute instead",
                target.name
            )));
        }
        let names: Vec<String> = predictors.iter().map(|c| c.name.clone()).collect();
        let columns = predictors.iter().map(|c| predictor_values(c)).collect::<Result<Vec<_>>>()?;
        let x = FeatureMatrix::new(names, columns)?;
        let observed: Vec<usize> = (0..out.row_count()).filter(|&r| !target.values.is_missing(r)).collect();
        if observed.is_empty() {
            return Err(Error::Imputation(format!("column {} has no observed values", target.name)));
        }
        let forest_cfg = config.forest(x.n_features(), derive_seed(seed, j as u64));
        let x_obs = x.select_rows(&observed);
        let filled = match &target.values {
            Values::Numeric(cells) => {
                let y: Vec<f64> = observed.iter().map(|&r| cells[r].expect("observed")).collect();
                let model = train_regression_forest(&x_obs, &y, &forest_cfg)?;
                let mut cells = cells.clone();
                for (r, cell) in cells.iter_mut().enumerate() {
                    if cell.is_none() {
                        *cell = Some(model.predict(&x.row(r))?);
                    }
                }
                Values::Numeric(cells)
            }
            Values::Text(cells) => {
                let map = EncodingMap::from_observed(&target)?;
                let y = observed
                    .iter()
                    .map(|&r| map.code(cells[r].as_deref().expect("observed")).expect("observed category"))
                    .collect();
                let model = train_forest(&Dataset::new(x_obs, y)?, &forest_cfg)?;
                let mut cells = cells.clone();
                for (r, cell) in cells.iter_mut().enumerate() {
                    if cell.is_none() {
                        let code = model.predict(&x.row(r))?;
                        *cell = map.category(code).map(str::to_string);
                    }
                }
                Values::Text(cells)
            }
        };
        out = out.replace_column(Column {
            values: filled,
            ..target
        })?;
    }
    Ok(out)
}

/// Fills each missing numeric feature cell with its column mean. The
/// baseline the forest imputer is compared against.
pub fn impute_mean(table: &DataTable) -> Result<DataTable> {
    let mut out = table.clone();
    for c in table.columns() {
        if let (ColumnKind::Numeric, Values::Numeric(cells)) = (c.kind, &c.values) {
            let obs: Vec<f64> = cells.iter().flatten().copied().collect();
            if obs.is_empty() || obs.len() == cells.len() {
                continue;
            }
            let m = crate::stats::mean(&obs);
            out = out.replace_column(Column {
                name: c.name.clone(),
                kind: c.kind,
                values: Values::Numeric(cells.iter().map(|v| Some(v.unwrap_or(m))).collect()),
            })?;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnOutliers {
    pub column: String,
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
    pub lower_fence: f64,
    pub upper_fence: f64,
    pub median: f64,
    pub replaced_count: usize,
}

impl ColumnOutliers {
    pub fn from_values(column: &str, values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let s = sorted(values.iter().copied());
        let (q1, median, q3) = (
            quantile_sorted(&s, 0.25),
            quantile_sorted(&s, 0.5),
            quantile_sorted(&s, 0.75),
        );
        let iqr = q3 - q1;
        Some(ColumnOutliers {
            column: column.to_string(),
            q1,
            q3,
            iqr,
            lower_fence: q1 - 1.5 * iqr,
            upper_fence: q3 + 1.5 * iqr,
            median,
            replaced_count: 0,
        })
    }

    pub fn is_outlier(&self, x: f64) -> bool {
        x < self.lower_fence || x > self.upper_fence
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OutlierReport {
    pub columns: Vec<ColumnOutliers>,
}

impl OutlierReport {
    pub fn get(&self, column: &str) -> Option<&ColumnOutliers> {
        self.columns.iter().find(|c| c.column == column)
    }

    pub fn total_replaced(&self) -> usize {
        self.columns.iter().map(|c| c.replaced_count).sum()
    }

    pub fn to_csv(&self) -> Result<String> {
        csv_string(
            &["column", "q1", "q3", "iqr", "lower_fence", "upper_fence", "median", "replaced"],
            self.columns.iter().map(|c| {
                vec![
                    c.column.clone(),
                    c.q1.to_string(),
                    c.q3.to_string(),
                    c.iqr.to_string(),
                    c.lower_fence.to_string(),
                    c.upper_fence.to_string(),
                    c.median.to_string(),
                    c.replaced_count.to_string(),
                ]
            }),
        )
    }
}

/// Replaces values outside the 1.5·IQR fences of each numeric feature
/// column by that column's median. Quartiles and median come from the
/// observed values before any replacement.
pub fn clip_outliers_iqr(table: &DataTable) -> Result<(DataTable, OutlierReport)> {
    let mut out = table.clone();
    let mut report = OutlierReport::default();
    for c in table.columns().iter().filter(|c| c.kind == ColumnKind::Numeric) {
        let Values::Numeric(cells) = &c.values else { continue };
        let observed: Vec<f64> = cells.iter().flatten().copied().collect();
        let Some(mut stats) = ColumnOutliers::from_values(&c.name, &observed) else { continue };
        let clipped: Vec<Option<f64>> = cells
            .iter()
            .map(|v| {
                v.map(|x| {
                    if stats.is_outlier(x) {
                        stats.replaced_count += 1;
                        stats.median
                    } else {
                        x
                    }
                })
            })
            .collect();
        if stats.replaced_count > 0 {
            out = out.replace_column(Column {
                name: c.name.clone(),
                kind: c.kind,
                values: Values::Numeric(clipped),
            })?;
        }
        report.columns.push(stats);
    }
    Ok((out, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrunedColumn {
    pub column: String,
    pub dominant: String,
    pub fraction: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PruneReport {
    pub pruned: Vec<PrunedColumn>,
}

impl PruneReport {
    pub fn to_csv(&self) -> Result<String> {
        csv_string(
            &["column", "dominant", "fraction"],
            self.pruned
                .iter()
                .map(|p| vec![p.column.clone(), p.dominant.clone(), p.fraction.to_string()]),
        )
    }
}

/// Most frequent observed category and its share of observed cells. Ties go
/// to the lexicographically smallest category.
pub fn modal_fraction(column: &Column) -> Option<(String, f64)> {
    let cells = column.as_text()?;
    let mut counts = std::collections::BTreeMap::<&str, usize>::new();
    for v in cells.iter().flatten() {
        *counts.entry(v).or_default() += 1;
    }
    let total: usize = counts.values().sum();
    let (cat, n) = counts.into_iter().fold(None, |best: Option<(&str, usize)>, (k, n)| match best {
        Some((_, bn)) if bn >= n => best,
        _ => Some((k, n)),
    })?;
    Some((cat.to_string(), n as f64 / total as f64))
}

/// Drops categorical columns whose modal category fraction exceeds
/// `threshold`.
pub fn prune_uniform_features(table: &DataTable, threshold: f64) -> Result<(DataTable, PruneReport)> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Config(format!("dominance threshold must lie in (0, 1), got {threshold}")));
    }
    let pruned: Vec<PrunedColumn> = table
        .columns()
        .iter()
        .filter(|c| c.kind == ColumnKind::Categorical)
        .filter_map(|c| {
            let (dominant, fraction) = modal_fraction(c)?;
            (fraction > threshold).then(|| PrunedColumn {
                column: c.name.clone(),
                dominant,
                fraction,
            })
        })
        .collect();
    let names: Vec<String> = pruned.iter().map(|p| p.column.clone()).collect();
    Ok((table.drop_columns(&names), PruneReport { pruned }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub missing_column_threshold: f64,
    pub max_missing: usize,
    pub dominance_threshold: f64,
    /// Column holding Male/Female, encoded 1/2 before imputation.
    pub gender_column: Option<String>,
    /// Columns removed before any other stage.
    pub blacklist: Vec<String>,
    pub scale: bool,
    pub seed: u64,
    pub impute: ImputeConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            missing_column_threshold: 0.5,
            max_missing: 6,
            dominance_threshold: 0.89,
            gender_column: Some("PTGENDER".into()),
            blacklist: Vec::new(),
            scale: false,
            seed: 42,
            impute: ImputeConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.missing_column_threshold > 0.0 && self.missing_column_threshold <= 1.0) {
            return Err(Error::Config("missing_column_threshold must lie in (0, 1]".into()));
        }
        if !(self.dominance_threshold > 0.0 && self.dominance_threshold < 1.0) {
            return Err(Error::Config("dominance_threshold must lie in (0, 1)".into()));
        }
        if self.impute.n_trees == 0 || self.impute.max_depth == 0 || self.impute.min_samples_leaf == 0 {
            return Err(Error::Config("imputation forest sizes must be at least 1".into()));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub table: DataTable,
    pub missingness: MissingnessProfile,
    pub dropped_columns: Vec<String>,
    pub dropped_records: usize,
    pub imputed_cells: usize,
    pub outliers: OutlierReport,
    pub prune: PruneReport,
    pub encodings: Vec<EncodingMap>,
    pub scaler: Option<MinMaxScaler>,
}

/// Runs every cleaning stage in order. Errors carry the failing stage name.
pub fn run_pipeline(table: &DataTable, config: &PipelineConfig) -> Result<PipelineOutput> {
    in_stage("config", config.validate())?;
    let table = table.drop_columns(&config.blacklist);

    let mut encodings = Vec::new();
    let label = in_stage("encode", table.label())?;
    if label.as_text().is_some() {
        encodings.push(EncodingMap::diagnosis(label.name.clone()));
    }
    if let Some(g) = &config.gender_column {
        if table.column(g).is_some_and(|c| c.as_text().is_some()) {
            encodings.push(EncodingMap::gender(g.clone()));
        }
    }
    let table = in_stage("encode", encode_categorical(&table, &encodings))?;
    in_stage("encode", class_codes(table.label()?).map(|_| ()))?;

    let missingness = profile_missingness(&table);
    let (table, dropped_columns) =
        in_stage("drop-columns", drop_high_missing_columns(&table, config.missing_column_threshold))?;
    let before = table.row_count();
    let table = drop_sparse_records(&table, config.max_missing);
    let dropped_records = before - table.row_count();

    let imputed_cells = table
        .columns()
        .iter()
        .filter(|c| is_feature_kind(c.kind))
        .map(Column::missing_count)
        .sum();
    let table = in_stage("impute", impute_random_forest(&table, &config.impute, config.seed))?;
    let (table, outliers) = in_stage("outliers", clip_outliers_iqr(&table))?;
    let (table, prune) = in_stage("prune", prune_uniform_features(&table, config.dominance_threshold))?;

    let remaining: Vec<EncodingMap> = in_stage(
        "encode",
        table
            .columns()
            .iter()
            .filter(|c| c.kind == ColumnKind::Categorical)
            .map(EncodingMap::from_observed)
            .collect(),
    )?;
    let table = in_stage("encode", encode_categorical(&table, &remaining))?;
    encodings.extend(remaining);

    let (table, scaler) = if config.scale {
        let cols: Vec<String> = table
            .columns()
            .iter()
            .filter(|c| c.kind == ColumnKind::Numeric)
            .map(|c| c.name.clone())
            .collect();
        let scaler = in_stage("scale", MinMaxScaler::fit(&table, &cols))?;
        (in_stage("scale", scaler.transform(&table))?, Some(scaler))
    } else {
        (table, None)
    };

    Ok(PipelineOutput {
        table,
        missingness,
        dropped_columns,
        dropped_records,
        imputed_cells,
        outliers,
        prune,
        encodings,
        scaler,
    })
}
