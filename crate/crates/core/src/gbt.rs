//! Gradient-boosted trees with a second-order (gradient + hessian) objective
//! and L2/complexity regularization, using softmax cross-entropy for
//! multiclass targets. Each round fits one regression tree per class.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{ClassCode, Dataset, FeatureMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoostConfig {
    pub n_rounds: usize,
    pub learning_rate: f64,
    /// L2 penalty on leaf weights.
    pub lambda: f64,
    /// Minimum gain for a split to be kept.
    pub gamma: f64,
    pub max_depth: usize,
    pub n_classes: u32,
    /// Stop after this many rounds without validation-loss improvement.
    /// Only used when a validation set is supplied.
    pub early_stopping_rounds: Option<usize>,
}

impl Default for BoostConfig {
    fn default() -> Self {
        BoostConfig {
            n_rounds: 200,
            learning_rate: 0.3,
            lambda: 1.0,
            gamma: 0.0,
            max_depth: 6,
            n_classes: 5,
            early_stopping_rounds: None,
        }
    }
}

impl BoostConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::Config(format!(
                "learning_rate must lie in [0, 1], got {}",
                self.learning_rate
            )));
        }
        if !(self.lambda >= 0.0) || !(self.gamma >= 0.0) {
            return Err(Error::Config("lambda and gamma must be non-negative".into()));
        }
        if self.max_depth == 0 {
            return Err(Error::Config("max_depth must be at least 1".into()));
        }
        if self.n_classes < 2 {
            return Err(Error::Config("n_classes must be at least 2".into()));
        }
        if self.early_stopping_rounds == Some(0) {
            return Err(Error::Config("early_stopping_rounds must be at least 1".into()));
        }
        Ok(())
    }
}

/// First and second derivative of the loss with respect to one margin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradHess {
    pub g: f64,
    pub h: f64,
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / sum).collect()
}

/// Negative log-likelihood of `label` under softmax(`logits`).
pub fn softmax_loss(logits: &[f64], label: ClassCode) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    lse - logits[label as usize - 1]
}

/// `g_k = p_k - 1{k = label}`, `h_k = p_k (1 - p_k)`.
pub fn softmax_grad_hess(logits: &[f64], label: ClassCode) -> Vec<GradHess> {
    softmax(logits)
        .into_iter()
        .enumerate()
        .map(|(k, p)| {
            let y = if k + 1 == label as usize { 1.0 } else { 0.0 };
            GradHess {
                g: p - y,
                h: p * (1.0 - p),
            }
        })
        .collect()
}

/// Optimal leaf weight `-G / (H + lambda)`.
pub fn fit_leaf_weight(g: f64, h: f64, lambda: f64) -> Result<f64> {
    let denom = h + lambda;
    if denom <= 0.0 {
        return Err(Error::Training(format!(
            "degenerate leaf: H + lambda = {denom}"
        )));
    }
    Ok(-g / denom)
}

/// Loss reduction of splitting a node into the given children.
pub fn split_gain(g_l: f64, h_l: f64, g_r: f64, h_r: f64, lambda: f64, gamma: f64) -> f64 {
    let score = |g: f64, h: f64| g * g / (h + lambda);
    0.5 * (score(g_l, h_l) + score(g_r, h_r) - score(g_l + g_r, h_l + h_r)) - gamma
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoostNode {
    Leaf {
        weight: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<BoostNode>,
        right: Box<BoostNode>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostTree {
    pub root: BoostNode,
}

impl BoostTree {
    /// Unshrunk leaf weight reached by `row`.
    pub fn weight(&self, row: &[f64]) -> Result<f64> {
        let mut node = &self.root;
        loop {
            match node {
                BoostNode::Leaf { weight } => return Ok(*weight),
                BoostNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    let v = row.get(*feature).ok_or_else(|| {
                        Error::Prediction(format!("row lacks feature index {feature}"))
                    })?;
                    node = if *v <= *threshold { left } else { right };
                }
            }
        }
    }

    fn weight_at(&self, x: &FeatureMatrix, r: usize) -> f64 {
        let mut node = &self.root;
        loop {
            match node {
                BoostNode::Leaf { weight } => return *weight,
                BoostNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if x.get(r, *feature) <= *threshold { left } else { right };
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostModel {
    pub config: BoostConfig,
    pub feature_names: Vec<String>,
    pub base_score: Vec<f64>,
    /// `trees[k][t]` is the round-`t` tree for class `k + 1`.
    pub trees: Vec<Vec<BoostTree>>,
    /// Mean training log-loss before any round.
    pub initial_loss: f64,
    /// Mean training log-loss after each round.
    pub train_loss: Vec<f64>,
    /// Mean validation log-loss after each round, when a validation set was given.
    pub valid_loss: Vec<f64>,
}

impl BoostModel {
    pub fn rounds(&self) -> usize {
        self.trees.first().map_or(0, Vec::len)
    }

    pub fn margins(&self, row: &[f64]) -> Result<Vec<f64>> {
        let eta = self.config.learning_rate;
        self.base_score
            .iter()
            .zip(&self.trees)
            .map(|(base, trees)| {
                let mut m = *base;
                for t in trees {
                    m += eta * t.weight(row)?;
                }
                Ok(m)
            })
            .collect()
    }

    pub fn predict(&self, row: &[f64]) -> Result<ClassCode> {
        Ok(argmax(&self.margins(row)?))
    }

    pub fn predict_all(&self, x: &FeatureMatrix) -> Result<Vec<ClassCode>> {
        (0..x.n_rows()).map(|r| self.predict(&x.row(r))).collect()
    }
}

/// Class code of the largest value, lowest code on ties.
pub fn argmax(values: &[f64]) -> ClassCode {
    let mut best = 0;
    for (k, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = k;
        }
    }
    best as ClassCode + 1
}

pub fn predict_boost(model: &BoostModel, row: &[f64]) -> Result<ClassCode> {
    model.predict(row)
}

struct TreeBuilder<'a> {
    x: &'a FeatureMatrix,
    grad: &'a [f64],
    hess: &'a [f64],
    config: &'a BoostConfig,
    goes_left: Vec<bool>,
}

impl TreeBuilder<'_> {
    fn build(&mut self, orders: Vec<Vec<u32>>, depth: usize) -> Result<BoostNode> {
        let rows = orders.first().map(Vec::as_slice).unwrap_or(&[]);
        let (g, h) = rows.iter().fold((0.0, 0.0), |(g, h), &r| {
            (g + self.grad[r as usize], h + self.hess[r as usize])
        });
        let leaf = |g, h| -> Result<BoostNode> {
            Ok(BoostNode::Leaf {
                weight: fit_leaf_weight(g, h, self.config.lambda)?,
            })
        };
        if depth >= self.config.max_depth || rows.len() < 2 {
            return leaf(g, h);
        }

        let lambda = self.config.lambda;
        let gamma = self.config.gamma;
        let mut best: Option<(f64, usize, f64)> = None;
        for (f, order) in orders.iter().enumerate() {
            let column = self.x.column(f);
            let (mut gl, mut hl) = (0.0, 0.0);
            for k in 0..order.len() - 1 {
                let r = order[k] as usize;
                gl += self.grad[r];
                hl += self.hess[r];
                let v = column[r];
                let next = column[order[k + 1] as usize];
                if v >= next {
                    continue;
                }
                let gain = split_gain(gl, hl, g - gl, h - hl, lambda, gamma);
                if gain > 0.0 && best.is_none_or(|(b, _, _)| gain > b) {
                    let mid = v + (next - v) / 2.0;
                    let threshold = if mid < next { mid } else { v };
                    best = Some((gain, f, threshold));
                }
            }
        }
        let Some((_, feature, threshold)) = best else {
            return leaf(g, h);
        };

        let column = self.x.column(feature);
        for &r in &orders[feature] {
            self.goes_left[r as usize] = column[r as usize] <= threshold;
        }
        let (left, right): (Vec<_>, Vec<_>) = orders
            .into_iter()
            .map(|o| o.into_iter().partition::<Vec<u32>, _>(|&r| self.goes_left[r as usize]))
            .unzip();
        Ok(BoostNode::Split {
            feature,
            threshold,
            left: Box::new(self.build(left, depth + 1)?),
            right: Box::new(self.build(right, depth + 1)?),
        })
    }
}

fn mean_loss(margins: &[Vec<f64>], labels: &[ClassCode]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    margins
        .iter()
        .zip(labels)
        .map(|(m, &y)| softmax_loss(m, y))
        .sum::<f64>()
        / labels.len() as f64
}

pub fn train_boost(data: &Dataset, config: &BoostConfig) -> Result<BoostModel> {
    train_boost_with_validation(data, None, config)
}

/// Boosting with optional early stopping on a held-out set. When early
/// stopping triggers, the model is truncated to the best validation round.
pub fn train_boost_with_validation(
    data: &Dataset,
    validation: Option<&Dataset>,
    config: &BoostConfig,
) -> Result<BoostModel> {
    config.validate()?;
    let n_classes = config.n_classes as usize;
    if data.labels.iter().any(|&y| y as usize > n_classes) {
        return Err(Error::Config(format!(
            "labels exceed the configured {n_classes} classes"
        )));
    }
    if data.n_rows() == 0 {
        return Err(Error::Training("cannot boost on an empty table".into()));
    }
    let x = &data.features;
    let n = data.n_rows();
    let eta = config.learning_rate;

    let root_orders: Vec<Vec<u32>> = (0..x.n_features())
        .map(|j| {
            let col = x.column(j);
            let mut o: Vec<u32> = (0..n as u32).collect();
            o.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]));
            o
        })
        .collect();

    let base_score = vec![0.0; n_classes];
    let mut margins = vec![base_score.clone(); n];
    let mut valid_margins = validation.map(|v| vec![base_score.clone(); v.n_rows()]);
    let mut trees: Vec<Vec<BoostTree>> = vec![Vec::with_capacity(config.n_rounds); n_classes];
    let initial_loss = mean_loss(&margins, &data.labels);
    let mut train_loss = Vec::with_capacity(config.n_rounds);
    let mut valid_loss = Vec::new();
    let mut best_round = (f64::INFINITY, 0usize);

    for round in 0..config.n_rounds {
        // Gradients are frozen at the start of the round.
        let mut grad = vec![vec![0.0; n]; n_classes];
        let mut hess = vec![vec![0.0; n]; n_classes];
        for (r, m) in margins.iter().enumerate() {
            for (k, gh) in softmax_grad_hess(m, data.labels[r]).into_iter().enumerate() {
                grad[k][r] = gh.g;
                hess[k][r] = gh.h;
            }
        }
        let round_trees = (0..n_classes)
            .into_par_iter()
            .map(|k| {
                let mut builder = TreeBuilder {
                    x,
                    grad: &grad[k],
                    hess: &hess[k],
                    config,
                    goes_left: vec![false; n],
                };
                builder.build(root_orders.clone(), 0).map(|root| BoostTree { root })
            })
            .collect::<Result<Vec<_>>>()?;

        for (k, tree) in round_trees.into_iter().enumerate() {
            for (r, m) in margins.iter_mut().enumerate() {
                m[k] += eta * tree.weight_at(x, r);
            }
            if let (Some(vm), Some(v)) = (valid_margins.as_mut(), validation) {
                for (r, m) in vm.iter_mut().enumerate() {
                    m[k] += eta * tree.weight_at(&v.features, r);
                }
            }
            trees[k].push(tree);
        }
        train_loss.push(mean_loss(&margins, &data.labels));

        if let (Some(vm), Some(v)) = (valid_margins.as_ref(), validation) {
            let loss = mean_loss(vm, &v.labels);
            valid_loss.push(loss);
            if loss < best_round.0 {
                best_round = (loss, round + 1);
            }
            if let Some(patience) = config.early_stopping_rounds {
                if round + 1 - best_round.1 >= patience {
                    for t in &mut trees {
                        t.truncate(best_round.1);
                    }
                    train_loss.truncate(best_round.1);
                    valid_loss.truncate(best_round.1);
                    break;
                }
            }
        }
    }

    Ok(BoostModel {
        config: config.clone(),
        feature_names: x.names().to_vec(),
        base_score,
        trees,
        initial_loss,
        train_loss,
        valid_loss,
    })
}
