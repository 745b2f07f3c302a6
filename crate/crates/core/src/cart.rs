//! CART decision trees: Gini-impurity splits for classification, squared
//! error splits for the regression trees used by the imputer.
//!
//! Growth works on per-feature presorted position lists that are stably
//! partitioned at every split, so a node costs O(n · p) after the initial
//! sort. Candidate thresholds are midpoints between consecutive distinct
//! values and rows go left iff `value <= threshold`.
//!
//! Ties between equally good splits resolve to the lowest feature index,
//! then the lowest threshold; leaf class ties resolve to the lowest code.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::dataset::{ClassCode, Dataset, FeatureMatrix};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Minimum impurity decrease for a split to count as an improvement.
const MIN_DECREASE: f64 = 1e-12;

/// Per-class sample counts; index `k` holds class code `k + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassDistribution {
    counts: Vec<u64>,
}

impl ClassDistribution {
    pub fn new(n_classes: usize) -> Self {
        ClassDistribution {
            counts: vec![0; n_classes],
        }
    }

    pub fn from_counts(counts: Vec<u64>) -> Self {
        ClassDistribution { counts }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn add(&mut self, class: ClassCode) {
        self.counts[class as usize - 1] += 1;
    }

    pub fn remove(&mut self, class: ClassCode) {
        self.counts[class as usize - 1] -= 1;
    }

    pub fn probabilities(&self) -> Vec<f64> {
        let total = self.total() as f64;
        self.counts.iter().map(|&c| c as f64 / total).collect()
    }

    /// Most frequent class, lowest code on ties. `None` when empty.
    pub fn majority(&self) -> Option<ClassCode> {
        let mut best: Option<(usize, u64)> = None;
        for (k, &c) in self.counts.iter().enumerate() {
            if c > 0 && best.is_none_or(|(_, bc)| c > bc) {
                best = Some((k, c));
            }
        }
        best.map(|(k, _)| k as ClassCode + 1)
    }
}

/// `1 - Σ p_j²`; 0 for an empty distribution.
pub fn gini(dist: &ClassDistribution) -> f64 {
    let total = dist.total();
    if total == 0 {
        return 0.0;
    }
    // Integer sums keep the result exactly invariant under permutation and
    // uniform scaling of the counts.
    let sum_sq: u128 = dist.counts.iter().map(|&c| c as u128 * c as u128).sum();
    1.0 - sum_sq as f64 / (total as u128 * total as u128) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            max_depth: 12,
            min_samples_leaf: 2,
        }
    }
}

impl TreeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth == 0 {
            return Err(Error::Config("max_depth must be at least 1".into()));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::Config("min_samples_leaf must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    pub weighted_impurity: f64,
    pub left: ClassDistribution,
    pub right: ClassDistribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Leaf {
    Class {
        class: ClassCode,
        distribution: ClassDistribution,
    },
    Mean {
        value: f64,
        samples: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Leaf(Leaf),
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    fn depth(&self) -> usize {
        match self {
            Node::Leaf(_) => 0,
            Node::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    fn leaves(&self) -> Vec<&Leaf> {
        match self {
            Node::Leaf(l) => vec![l],
            Node::Split { left, right, .. } => {
                let mut v = left.leaves();
                v.extend(right.leaves());
                v
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub feature_names: Vec<String>,
    pub config: TreeConfig,
    pub root: Node,
}

impl DecisionTree {
    /// Leaf reached by `row`, whose values follow `feature_names` order.
    pub fn leaf(&self, row: &[f64]) -> Result<&Leaf> {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf(l) => return Ok(l),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    let v = row.get(*feature).ok_or_else(|| {
                        Error::Prediction(format!(
                            "row has {} values but the tree splits on feature {} ({})",
                            row.len(),
                            feature,
                            self.feature_names.get(*feature).map_or("?", String::as_str)
                        ))
                    })?;
                    node = if *v <= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn predict(&self, row: &[f64]) -> Result<ClassCode> {
        match self.leaf(row)? {
            Leaf::Class { class, .. } => Ok(*class),
            Leaf::Mean { .. } => Err(Error::Prediction("regression tree has no class output".into())),
        }
    }

    pub fn predict_value(&self, row: &[f64]) -> Result<f64> {
        match self.leaf(row)? {
            Leaf::Mean { value, .. } => Ok(*value),
            Leaf::Class { .. } => Err(Error::Prediction("classification tree has no mean output".into())),
        }
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    pub fn leaves(&self) -> Vec<&Leaf> {
        self.root.leaves()
    }
}

/// Running statistics of the targets in a node.
trait NodeStats: Clone {
    type Target: Copy;
    fn add(&mut self, y: Self::Target);
    fn remove(&mut self, y: Self::Target);
    fn count(&self) -> u64;
    fn impurity(&self) -> f64;
    fn leaf(&self, offset: f64) -> Leaf;
}

impl NodeStats for ClassDistribution {
    type Target = ClassCode;

    fn add(&mut self, y: ClassCode) {
        ClassDistribution::add(self, y)
    }
    fn remove(&mut self, y: ClassCode) {
        ClassDistribution::remove(self, y)
    }
    fn count(&self) -> u64 {
        self.total()
    }
    fn impurity(&self) -> f64 {
        gini(self)
    }
    fn leaf(&self, _offset: f64) -> Leaf {
        Leaf::Class {
            class: self.majority().unwrap_or(1),
            distribution: self.clone(),
        }
    }
}

#[derive(Debug, Clone, Default)]
struct SquaredError {
    n: u64,
    sum: f64,
    sum_sq: f64,
}

impl NodeStats for SquaredError {
    type Target = f64;

    fn add(&mut self, y: f64) {
        self.n += 1;
        self.sum += y;
        self.sum_sq += y * y;
    }
    fn remove(&mut self, y: f64) {
        self.n -= 1;
        self.sum -= y;
        self.sum_sq -= y * y;
    }
    fn count(&self) -> u64 {
        self.n
    }
    /// Variance (mean squared error around the node mean).
    fn impurity(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        let n = self.n as f64;
        ((self.sum_sq - self.sum * self.sum / n) / n).max(0.0)
    }
    fn leaf(&self, offset: f64) -> Leaf {
        Leaf::Mean {
            value: offset + self.sum / self.n as f64,
            samples: self.n as usize,
        }
    }
}

struct Split<S> {
    feature: usize,
    threshold: f64,
    weighted_impurity: f64,
    left: S,
    right: S,
}

/// Midpoint threshold that keeps `lo` on the left and `hi` on the right.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid < hi {
        mid
    } else {
        lo
    }
}

/// Best threshold on one feature given the node's positions sorted by value.
fn scan_feature<S: NodeStats>(
    x: &FeatureMatrix,
    sample: &[usize],
    targets: &[S::Target],
    feature: usize,
    order: &[u32],
    parent: &S,
    empty: &S,
    min_leaf: u64,
) -> Option<Split<S>> {
    let column = x.column(feature);
    let n = parent.count();
    let mut left = empty.clone();
    let mut right = parent.clone();
    let mut best: Option<Split<S>> = None;
    for k in 0..order.len().saturating_sub(1) {
        let row = sample[order[k] as usize];
        let y = targets[row];
        left.add(y);
        right.remove(y);
        let v = column[row];
        let next = column[sample[order[k + 1] as usize]];
        if v >= next || left.count() < min_leaf || right.count() < min_leaf {
            continue;
        }
        let weighted = (left.count() as f64 * left.impurity()
            + right.count() as f64 * right.impurity())
            / n as f64;
        if best.as_ref().is_none_or(|b| weighted < b.weighted_impurity) {
            best = Some(Split {
                feature,
                threshold: midpoint(v, next),
                weighted_impurity: weighted,
                left: left.clone(),
                right: right.clone(),
            });
        }
    }
    best
}

fn best_over<S: NodeStats>(
    x: &FeatureMatrix,
    sample: &[usize],
    targets: &[S::Target],
    features: &[usize],
    orders: &[Vec<u32>],
    parent: &S,
    empty: &S,
    min_leaf: u64,
) -> Option<Split<S>> {
    let parent_impurity = parent.impurity();
    let mut best: Option<Split<S>> = None;
    for &f in features {
        if let Some(s) = scan_feature(x, sample, targets, f, &orders[f], parent, empty, min_leaf) {
            if best.as_ref().is_none_or(|b| s.weighted_impurity < b.weighted_impurity) {
                best = Some(s);
            }
        }
    }
    best.filter(|b| parent_impurity - b.weighted_impurity > MIN_DECREASE)
}

fn sorted_orders(x: &FeatureMatrix, sample: &[usize]) -> Vec<Vec<u32>> {
    (0..x.n_features())
        .map(|j| {
            let col = x.column(j);
            let mut order: Vec<u32> = (0..sample.len() as u32).collect();
            order.sort_by(|&a, &b| col[sample[a as usize]].total_cmp(&col[sample[b as usize]]));
            order
        })
        .collect()
}

struct Grower<'a, S: NodeStats> {
    x: &'a FeatureMatrix,
    sample: &'a [usize],
    targets: &'a [S::Target],
    config: TreeConfig,
    features_per_split: usize,
    empty: S,
    offset: f64,
    rng: &'a mut Rng,
    goes_left: Vec<bool>,
}

impl<S: NodeStats> Grower<'_, S> {
    fn candidate_features(&mut self) -> Vec<usize> {
        let p = self.x.n_features();
        if self.features_per_split >= p {
            (0..p).collect()
        } else {
            let mut f = index::sample(self.rng, p, self.features_per_split).into_vec();
            f.sort_unstable();
            f
        }
    }

    fn grow(&mut self, orders: Vec<Vec<u32>>, stats: S, depth: usize) -> Node {
        let min_leaf = self.config.min_samples_leaf as u64;
        if depth >= self.config.max_depth
            || stats.count() < 2 * min_leaf
            || stats.impurity() <= 0.0
            || self.x.n_features() == 0
        {
            return Node::Leaf(stats.leaf(self.offset));
        }
        let features = self.candidate_features();
        let Some(split) = best_over(
            self.x,
            self.sample,
            self.targets,
            &features,
            &orders,
            &stats,
            &self.empty,
            min_leaf,
        ) else {
            return Node::Leaf(stats.leaf(self.offset));
        };

        let column = self.x.column(split.feature);
        for &pos in &orders[split.feature] {
            self.goes_left[pos as usize] = column[self.sample[pos as usize]] <= split.threshold;
        }
        let (left_orders, right_orders): (Vec<_>, Vec<_>) = orders
            .into_iter()
            .map(|order| order.into_iter().partition::<Vec<u32>, _>(|&p| self.goes_left[p as usize]))
            .unzip();

        let left = self.grow(left_orders, split.left, depth + 1);
        let right = self.grow(right_orders, split.right, depth + 1);
        Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: Box::new(left),
            right: Box::new(right),
        }
    }
}

fn resolve_features_per_split(p: usize, features_per_split: Option<usize>) -> Result<usize> {
    match features_per_split {
        None => Ok(p),
        Some(k) if k >= 1 && k <= p.max(1) => Ok(k),
        Some(k) => Err(Error::Config(format!(
            "features_per_split must be in 1..={p}, got {k}"
        ))),
    }
}

/// Grows a classification tree on `sample` (row indices, repeats allowed).
///
/// When `features_per_split` is below the feature count, each split draws
/// that many candidate features from `rng`; otherwise `rng` is not used.
pub fn grow_tree(
    data: &Dataset,
    sample: &[usize],
    features_per_split: Option<usize>,
    config: &TreeConfig,
    rng: &mut Rng,
) -> Result<DecisionTree> {
    config.validate()?;
    if sample.is_empty() {
        return Err(Error::Training("cannot grow a tree on zero rows".into()));
    }
    let x = &data.features;
    let features_per_split = resolve_features_per_split(x.n_features(), features_per_split)?;
    let empty = ClassDistribution::new(data.n_classes as usize);
    let mut stats = empty.clone();
    for &r in sample {
        stats.add(data.labels[r]);
    }
    let mut grower = Grower {
        x,
        sample,
        targets: &data.labels,
        config: *config,
        features_per_split,
        empty,
        offset: 0.0,
        rng,
        goes_left: vec![false; sample.len()],
    };
    let root = grower.grow(sorted_orders(x, sample), stats, 0);
    Ok(DecisionTree {
        feature_names: x.names().to_vec(),
        config: *config,
        root,
    })
}

/// Grows a least-squares regression tree whose leaves hold target means.
pub fn grow_regression_tree(
    x: &FeatureMatrix,
    targets: &[f64],
    sample: &[usize],
    features_per_split: Option<usize>,
    config: &TreeConfig,
    rng: &mut Rng,
) -> Result<DecisionTree> {
    config.validate()?;
    if sample.is_empty() {
        return Err(Error::Training("cannot grow a tree on zero rows".into()));
    }
    let features_per_split = resolve_features_per_split(x.n_features(), features_per_split)?;
    // Centering keeps the running sums well conditioned for large-valued targets.
    let offset = sample.iter().map(|&r| targets[r]).sum::<f64>() / sample.len() as f64;
    let centered: Vec<f64> = targets.iter().map(|y| y - offset).collect();
    let mut stats = SquaredError::default();
    for &r in sample {
        stats.add(centered[r]);
    }
    let mut grower = Grower {
        x,
        sample,
        targets: &centered,
        config: *config,
        features_per_split,
        empty: SquaredError::default(),
        offset,
        rng,
        goes_left: vec![false; sample.len()],
    };
    let root = grower.grow(sorted_orders(x, sample), stats, 0);
    Ok(DecisionTree {
        feature_names: x.names().to_vec(),
        config: *config,
        root,
    })
}

/// The Gini-minimizing split of `rows` over `features`, or `None` when the
/// node is pure or no split lowers the impurity.
pub fn best_split(
    data: &Dataset,
    rows: &[usize],
    features: &[usize],
    min_samples_leaf: usize,
) -> Option<SplitCandidate> {
    let empty = ClassDistribution::new(data.n_classes as usize);
    let mut parent = empty.clone();
    for &r in rows {
        parent.add(data.labels[r]);
    }
    let orders = sorted_orders(&data.features, rows);
    best_over(
        &data.features,
        rows,
        &data.labels,
        features,
        &orders,
        &parent,
        &empty,
        min_samples_leaf.max(1) as u64,
    )
    .map(|s| SplitCandidate {
        feature: s.feature,
        threshold: s.threshold,
        weighted_impurity: s.weighted_impurity,
        left: s.left,
        right: s.right,
    })
}
