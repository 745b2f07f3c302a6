//! Bagged CART ensembles with per-split feature subsampling.
//!
//! Tree `b` draws its bootstrap and feature subsets from generator stream `b`
//! of the configured seed, so serial and parallel training agree exactly.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cart::{grow_regression_tree, grow_tree, ClassDistribution, DecisionTree, TreeConfig};
use crate::dataset::{ClassCode, Dataset, FeatureMatrix};
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Candidate features per split; `None` means ⌈√p⌉.
    pub features_per_split: Option<usize>,
    /// When false every tree sees the training rows once, in order.
    pub bootstrap: bool,
    /// Rows drawn per tree; `None` means the training row count.
    pub bootstrap_size: Option<usize>,
    pub seed: u64,
    pub tree: TreeConfig,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            features_per_split: None,
            bootstrap: true,
            bootstrap_size: None,
            seed: 42,
            tree: TreeConfig::default(),
        }
    }
}

impl ForestConfig {
    pub fn resolved_features_per_split(&self, p: usize) -> usize {
        self.features_per_split
            .unwrap_or_else(|| (p as f64).sqrt().ceil() as usize)
            .max(1)
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        self.tree.validate()?;
        if self.n_trees == 0 {
            return Err(Error::Config("n_trees must be at least 1".into()));
        }
        let k = self.resolved_features_per_split(p);
        if p > 0 && k > p {
            return Err(Error::Config(format!(
                "features_per_split {k} exceeds the {p} available features"
            )));
        }
        if self.bootstrap_size == Some(0) {
            return Err(Error::Config("bootstrap_size must be at least 1".into()));
        }
        Ok(())
    }
}

/// `size` indices drawn uniformly with replacement from `0..n`.
pub fn bootstrap_sample(n: usize, size: usize, rng: &mut Rng) -> Vec<usize> {
    assert!(n >= 1, "bootstrap over an empty population");
    (0..size).map(|_| rng.random_range(0..n)).collect()
}

fn tree_sample(config: &ForestConfig, n: usize, rng: &mut Rng) -> Vec<usize> {
    if config.bootstrap {
        bootstrap_sample(n, config.bootstrap_size.unwrap_or(n), rng)
    } else {
        (0..n).collect()
    }
}

/// Trains every member in parallel; output order is by tree index.
fn fit_members<F>(config: &ForestConfig, n: usize, grow: F) -> Result<Vec<(DecisionTree, Vec<usize>)>>
where
    F: Fn(&[usize], &mut Rng) -> Result<DecisionTree> + Sync,
{
    (0..config.n_trees)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(config.seed, b as u64);
            let sample = tree_sample(config, n, &mut rng);
            let tree = grow(&sample, &mut rng)?;
            Ok((tree, sample))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub config: ForestConfig,
    pub feature_names: Vec<String>,
    pub n_classes: u32,
    pub trees: Vec<DecisionTree>,
    /// Row indices each tree was grown on.
    pub bootstrap_records: Vec<Vec<usize>>,
}

pub fn train_forest(data: &Dataset, config: &ForestConfig) -> Result<ForestModel> {
    let p = data.features.n_features();
    config.validate(p)?;
    if data.n_rows() == 0 {
        return Err(Error::Training("cannot train a forest on an empty table".into()));
    }
    let k = config.resolved_features_per_split(p);
    let members = fit_members(config, data.n_rows(), |sample, rng| {
        grow_tree(data, sample, (p > 0).then_some(k), &config.tree, rng)
    })?;
    let (trees, bootstrap_records) = members.into_iter().unzip();
    Ok(ForestModel {
        config: config.clone(),
        feature_names: data.features.names().to_vec(),
        n_classes: data.n_classes,
        trees,
        bootstrap_records,
    })
}

/// Most common vote, lowest class code on ties.
pub fn majority_vote(votes: &[ClassCode], n_classes: u32) -> Option<ClassCode> {
    let mut dist = ClassDistribution::new(n_classes as usize);
    for &v in votes {
        dist.add(v);
    }
    dist.majority()
}

impl ForestModel {
    pub fn votes(&self, row: &[f64]) -> Result<Vec<ClassCode>> {
        self.trees.iter().map(|t| t.predict(row)).collect()
    }

    pub fn predict(&self, row: &[f64]) -> Result<ClassCode> {
        let votes = self.votes(row)?;
        majority_vote(&votes, self.n_classes)
            .ok_or_else(|| Error::Prediction("forest has no trees".into()))
    }

    pub fn predict_all(&self, x: &FeatureMatrix) -> Result<Vec<ClassCode>> {
        (0..x.n_rows()).map(|r| self.predict(&x.row(r))).collect()
    }
}

/// Majority vote over the member trees.
pub fn predict_majority(model: &ForestModel, row: &[f64]) -> Result<ClassCode> {
    model.predict(row)
}

/// Bagged least-squares trees whose prediction is the mean member output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionForest {
    pub config: ForestConfig,
    pub feature_names: Vec<String>,
    pub trees: Vec<DecisionTree>,
}

pub fn train_regression_forest(
    x: &FeatureMatrix,
    targets: &[f64],
    config: &ForestConfig,
) -> Result<RegressionForest> {
    let p = x.n_features();
    config.validate(p)?;
    if x.n_rows() == 0 || targets.len() != x.n_rows() {
        return Err(Error::Training("regression forest needs one target per row".into()));
    }
    let k = config.resolved_features_per_split(p);
    let members = fit_members(config, x.n_rows(), |sample, rng| {
        grow_regression_tree(x, targets, sample, (p > 0).then_some(k), &config.tree, rng)
    })?;
    Ok(RegressionForest {
        config: config.clone(),
        feature_names: x.names().to_vec(),
        trees: members.into_iter().map(|(t, _)| t).collect(),
    })
}

impl RegressionForest {
    pub fn predict(&self, row: &[f64]) -> Result<f64> {
        let mut sum = 0.0;
        for t in &self.trees {
            sum += t.predict_value(row)?;
        }
        Ok(sum / self.trees.len() as f64)
    }
}
