//! Repeated random train/test evaluation and model comparison.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{class_codes, feature_names, ClassCode, Dataset, FeatureMatrix};
use crate::error::{Error, Result};
use crate::forest::{train_forest, ForestConfig, ForestModel};
use crate::gbt::{train_boost, BoostConfig, BoostModel};
use crate::rng::{derive_seed, stream_rng};
use crate::stats::{mean, std_dev};
use crate::svm::{train_ovr, LinearOvrModel, SvmConfig};
use crate::table::{DataTable, MinMaxScaler};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub repeats: usize,
    pub base_seed: u64,
    /// Split each class separately so both parts keep the class mix.
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.7,
            repeats: 10,
            base_seed: 42,
            stratified: false,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train_fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        Ok(())
    }
}

fn shuffled(mut rows: Vec<usize>, rng: &mut crate::rng::Rng) -> Vec<usize> {
    rows.shuffle(rng);
    rows
}

/// Row indices of the train and test parts for one repeat, each ascending.
/// `labels` is only consulted for stratified splits.
pub fn split_indices(
    n: usize,
    labels: Option<&[ClassCode]>,
    spec: &SplitSpec,
    repeat: usize,
) -> Result<(Vec<usize>, Vec<usize>)> {
    spec.validate()?;
    if repeat >= spec.repeats {
        return Err(Error::Split(format!("repeat {repeat} out of range 0..{}", spec.repeats)));
    }
    if n < 2 {
        return Err(Error::Split(format!("need at least 2 rows, got {n}")));
    }
    let mut rng = stream_rng(spec.base_seed, repeat as u64);
    let groups: Vec<Vec<usize>> = match (spec.stratified, labels) {
        (true, Some(labels)) => {
            let k = labels.iter().copied().max().unwrap_or(0) as usize;
            let mut g = vec![Vec::new(); k + 1];
            for (r, &c) in labels.iter().enumerate() {
                g[c as usize].push(r);
            }
            g
        }
        (true, None) => return Err(Error::Split("stratified split needs labels".into())),
        _ => vec![(0..n).collect()],
    };
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for g in groups {
        let size = (g.len() as f64 * spec.train_fraction).round() as usize;
        let g = shuffled(g, &mut rng);
        train.extend_from_slice(&g[..size]);
        test.extend_from_slice(&g[size..]);
    }
    if train.is_empty() || test.is_empty() {
        return Err(Error::Split(format!("split of {n} rows leaves an empty part")));
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn split_train_test(table: &DataTable, spec: &SplitSpec, repeat: usize) -> Result<(DataTable, DataTable)> {
    let labels = if spec.stratified {
        Some(class_codes(table.label()?)?)
    } else {
        None
    };
    let (train, test) = split_indices(table.row_count(), labels.as_deref(), spec, repeat)?;
    Ok((table.select_rows(&train), table.select_rows(&test)))
}

pub fn accuracy(predictions: &[ClassCode], labels: &[ClassCode]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::Prediction(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::Prediction("accuracy of an empty set".into()));
    }
    let hits = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / labels.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelFamily {
    Forest,
    Gbt,
    Svm,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 3] = [ModelFamily::Forest, ModelFamily::Gbt, ModelFamily::Svm];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelFamily::Forest => "forest",
            ModelFamily::Gbt => "gbt",
            ModelFamily::Svm => "svm",
        }
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelFamily::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown model {s:?} (expected forest, gbt or svm)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub forest: ForestConfig,
    pub gbt: BoostConfig,
    pub svm: SvmConfig,
    /// Identifier columns admitted as features.
    pub whitelist: Vec<String>,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            forest: ForestConfig::default(),
            gbt: BoostConfig {
                n_rounds: 50,
                ..BoostConfig::default()
            },
            svm: SvmConfig::default(),
            whitelist: Vec::new(),
        }
    }
}

impl Hyperparams {
    /// Same settings with every stochastic seed re-derived from `salt`.
    pub fn reseeded(&self, salt: u64) -> Hyperparams {
        let mut h = self.clone();
        h.forest.seed = derive_seed(self.forest.seed, salt);
        h.svm.seed = derive_seed(self.svm.seed, salt);
        h
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum TrainedModel {
    Forest(ForestModel),
    Gbt(BoostModel),
    Svm(LinearOvrModel),
}

impl TrainedModel {
    pub fn predict_all(&self, x: &FeatureMatrix) -> Result<Vec<ClassCode>> {
        match self {
            TrainedModel::Forest(m) => m.predict_all(x),
            TrainedModel::Gbt(m) => m.predict_all(x),
            TrainedModel::Svm(m) => m.predict_all(x),
        }
    }

    pub fn feature_names(&self) -> &[String] {
        match self {
            TrainedModel::Forest(m) => &m.feature_names,
            TrainedModel::Gbt(m) => &m.feature_names,
            TrainedModel::Svm(m) => &m.feature_names,
        }
    }
}

/// A model together with the min-max scaling fitted on its training table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub scaler: MinMaxScaler,
    pub model: TrainedModel,
}

impl FittedModel {
    pub fn predict_table(&self, table: &DataTable) -> Result<Vec<ClassCode>> {
        let scaled = self.scaler.transform(table)?;
        let x = FeatureMatrix::from_table(&scaled, self.model.feature_names())?;
        self.model.predict_all(&x)
    }
}

/// Fits scaling on `train` and then one model. `n_classes` fixes the class
/// range so that models trained on different subsets agree on it.
pub fn fit_model(
    family: ModelFamily,
    train: &DataTable,
    hp: &Hyperparams,
    n_classes: u32,
) -> Result<FittedModel> {
    let names = feature_names(train, &hp.whitelist);
    let scaler = MinMaxScaler::fit(train, &names)?;
    let scaled = scaler.transform(train)?;
    let data = Dataset::from_table(&scaled, &hp.whitelist)?.with_n_classes(n_classes);
    let model = match family {
        ModelFamily::Forest => TrainedModel::Forest(train_forest(&data, &hp.forest)?),
        ModelFamily::Gbt => TrainedModel::Gbt(train_boost(
            &data,
            &BoostConfig {
                n_classes,
                ..hp.gbt.clone()
            },
        )?),
        ModelFamily::Svm => TrainedModel::Svm(train_ovr(&data, &hp.svm)?),
    };
    Ok(FittedModel { scaler, model })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub train_acc: Vec<f64>,
    pub test_acc: Vec<f64>,
    pub mean_train: f64,
    pub mean_test: f64,
    pub sd_train: f64,
    pub sd_test: f64,
}

impl EvalReport {
    pub fn new(model: impl Into<String>, train_acc: Vec<f64>, test_acc: Vec<f64>) -> Self {
        EvalReport {
            model: model.into(),
            mean_train: mean(&train_acc),
            mean_test: mean(&test_acc),
            sd_train: std_dev(&train_acc),
            sd_test: std_dev(&test_acc),
            train_acc,
            test_acc,
        }
    }

    /// `repeat,train_acc,test_acc`, one row per repeat.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("repeat,train_acc,test_acc\r\n");
        for (i, (a, b)) in self.train_acc.iter().zip(&self.test_acc).enumerate() {
            s.push_str(&format!("{i},{a},{b}\r\n"));
        }
        s
    }
}

fn label_count(table: &DataTable) -> Result<u32> {
    let codes = class_codes(table.label()?)?;
    Ok(codes.into_iter().max().unwrap_or(0))
}

/// Train and test accuracy of one family over `spec.repeats` splits. Each
/// repeat fits fresh scaling and a fresh model on its training part only.
pub fn repeated_eval(
    family: ModelFamily,
    table: &DataTable,
    spec: &SplitSpec,
    hp: &Hyperparams,
) -> Result<EvalReport> {
    spec.validate()?;
    let n_classes = label_count(table)?;
    let scores = (0..spec.repeats)
        .into_par_iter()
        .map(|repeat| {
            let run = || -> Result<(f64, f64)> {
                let (train, test) = split_train_test(table, spec, repeat)?;
                let fitted = fit_model(family, &train, &hp.reseeded(repeat as u64), n_classes)?;
                let train_acc = accuracy(&fitted.predict_table(&train)?, &class_codes(train.label()?)?)?;
                let test_acc = accuracy(&fitted.predict_table(&test)?, &class_codes(test.label()?)?)?;
                Ok((train_acc, test_acc))
            };
            run().map_err(|e| Error::Repeat {
                repeat,
                source: Box::new(e),
            })
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let (train, test) = scores.into_iter().unzip();
    Ok(EvalReport::new(family.as_str(), train, test))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedModel {
    pub model: String,
    pub mean_test_acc: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub ranking: Vec<RankedModel>,
}

impl ComparisonReport {
    /// Ranks by mean test accuracy, descending; ties by model name.
    pub fn from_reports(reports: &[EvalReport]) -> Self {
        let mut rows: Vec<(&str, f64)> = reports.iter().map(|r| (r.model.as_str(), r.mean_test)).collect();
        rows.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        ComparisonReport {
            ranking: rows
                .into_iter()
                .enumerate()
                .map(|(i, (m, acc))| RankedModel {
                    model: m.to_string(),
                    mean_test_acc: acc,
                    rank: i + 1,
                })
                .collect(),
        }
    }

    pub fn get(&self, model: &str) -> Option<&RankedModel> {
        self.ranking.iter().find(|r| r.model == model)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("model,mean_test_acc,rank\r\n");
        for r in &self.ranking {
            s.push_str(&format!("{},{},{}\r\n", r.model, r.mean_test_acc, r.rank));
        }
        s
    }
}

/// Evaluates every requested family on the same splits and ranks them.
pub fn compare_models(
    table: &DataTable,
    spec: &SplitSpec,
    hp: &Hyperparams,
    families: &[ModelFamily],
) -> Result<(Vec<EvalReport>, ComparisonReport)> {
    let reports = families
        .iter()
        .map(|&f| repeated_eval(f, table, spec, hp))
        .collect::<Result<Vec<_>>>()?;
    let comparison = ComparisonReport::from_reports(&reports);
    Ok((reports, comparison))
}
