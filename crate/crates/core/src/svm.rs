//! Linear max-margin classifiers trained by stochastic subgradient descent on
//! the primal objective `λ/2 ‖ω‖² + mean(max(0, 1 - y (ω·x + b)))`, with step
//! size `1 / (λ t)` and an unregularized bias. Multiclass problems are
//! reduced one-vs-rest.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{ClassCode, Dataset, FeatureMatrix};
use crate::error::{Error, Result};
use crate::gbt::argmax;
use crate::rng::{derive_seed, stream_rng};

/// Accepted feature range. Inputs are expected to be min-max scaled; values
/// far outside [0, 1] mean scaling was skipped upstream.
pub const FEATURE_RANGE: (f64, f64) = (-0.5, 1.5);

/// Hyperplane `ω·x + b = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub omega: Vec<f64>,
    pub b: f64,
}

impl LinearModel {
    pub fn decision_value(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.omega.len() {
            return Err(Error::Prediction(format!(
                "expected {} features, got {}",
                self.omega.len(),
                x.len()
            )));
        }
        Ok(dot(&self.omega, x) + self.b)
    }

    pub fn scaled(&self, c: f64) -> LinearModel {
        LinearModel {
            omega: self.omega.iter().map(|w| w * c).collect(),
            b: self.b * c,
        }
    }
}

pub fn decision_value(model: &LinearModel, x: &[f64]) -> Result<f64> {
    model.decision_value(x)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveTrace {
    Off,
    #[default]
    Epoch,
    Step,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmConfig {
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
    pub trace: ObjectiveTrace,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            lambda: 0.01,
            epochs: 200,
            seed: 42,
            trace: ObjectiveTrace::Epoch,
        }
    }
}

impl SvmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) {
            return Err(Error::Config(format!("lambda must be positive, got {}", self.lambda)));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmFit {
    pub model: LinearModel,
    /// Regularized hinge objective recorded per epoch or per step.
    pub objective: Vec<f64>,
}

/// `λ/2 ‖ω‖² + mean hinge loss` over all rows.
pub fn objective(model: &LinearModel, x: &FeatureMatrix, y: &[f64], lambda: f64) -> f64 {
    let n = x.n_rows();
    let hinge: f64 = (0..n)
        .map(|r| {
            let v = dot_row(&model.omega, x, r) + model.b;
            (1.0 - y[r] * v).max(0.0)
        })
        .sum();
    0.5 * lambda * dot(&model.omega, &model.omega) + hinge / n as f64
}

fn dot_row(omega: &[f64], x: &FeatureMatrix, r: usize) -> f64 {
    omega.iter().enumerate().map(|(j, w)| w * x.get(r, j)).sum()
}

fn check_range(x: &FeatureMatrix) -> Result<()> {
    let (lo, hi) = FEATURE_RANGE;
    for j in 0..x.n_features() {
        if let Some(v) = x.column(j).iter().find(|v| !(**v >= lo && **v <= hi)) {
            return Err(Error::Training(format!(
                "feature {} has value {v} outside [{lo}, {hi}]; scale features before SVM training",
                x.names()[j]
            )));
        }
    }
    Ok(())
}

/// Trains on ±1 targets.
pub fn train_binary(x: &FeatureMatrix, y: &[f64], config: &SvmConfig) -> Result<SvmFit> {
    config.validate()?;
    check_range(x)?;
    let n = x.n_rows();
    if y.len() != n {
        return Err(Error::Training("one target per row required".into()));
    }
    if !(y.iter().any(|&v| v > 0.0) && y.iter().any(|&v| v < 0.0)) {
        return Err(Error::Training("both classes must be present".into()));
    }

    let lambda = config.lambda;
    let radius = 1.0 / lambda.sqrt();
    let mut model = LinearModel {
        omega: vec![0.0; x.n_features()],
        b: 0.0,
    };
    let mut trace = Vec::new();
    let mut rng = stream_rng(config.seed, 0);
    let mut order: Vec<usize> = (0..n).collect();
    let mut t = 0u64;
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for &r in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let violated = y[r] * (dot_row(&model.omega, x, r) + model.b) < 1.0;
            let shrink = 1.0 - eta * lambda;
            for w in &mut model.omega {
                *w *= shrink;
            }
            if violated {
                for (j, w) in model.omega.iter_mut().enumerate() {
                    *w += eta * y[r] * x.get(r, j);
                }
                model.b += eta * y[r];
            }
            let norm = dot(&model.omega, &model.omega).sqrt();
            if norm > radius {
                let s = radius / norm;
                for w in &mut model.omega {
                    *w *= s;
                }
            }
            if config.trace == ObjectiveTrace::Step {
                trace.push(objective(&model, x, y, lambda));
            }
        }
        if config.trace == ObjectiveTrace::Epoch {
            trace.push(objective(&model, x, y, lambda));
        }
    }
    Ok(SvmFit {
        model,
        objective: trace,
    })
}

/// Binary problem `positive_class` vs. the rest.
pub fn train_linear_svm(
    data: &Dataset,
    positive_class: ClassCode,
    config: &SvmConfig,
) -> Result<SvmFit> {
    let y: Vec<f64> = data
        .labels
        .iter()
        .map(|&l| if l == positive_class { 1.0 } else { -1.0 })
        .collect();
    train_binary(&data.features, &y, config).map_err(|e| match e {
        Error::Training(msg) => Error::Training(format!("class {positive_class}: {msg}")),
        other => other,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearOvrModel {
    pub config: SvmConfig,
    pub feature_names: Vec<String>,
    /// `members[k]` separates class `k + 1` from the rest.
    pub members: Vec<LinearModel>,
}

/// One binary model per class `1..=n_classes`, each with its own derived seed.
pub fn train_ovr(data: &Dataset, config: &SvmConfig) -> Result<LinearOvrModel> {
    config.validate()?;
    if data.n_classes < 2 {
        return Err(Error::Training("need at least two classes".into()));
    }
    let members = (1..=data.n_classes)
        .into_par_iter()
        .map(|k| {
            let cfg = SvmConfig {
                seed: derive_seed(config.seed, k as u64),
                trace: ObjectiveTrace::Off,
                ..config.clone()
            };
            train_linear_svm(data, k, &cfg).map(|fit| fit.model)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LinearOvrModel {
        config: config.clone(),
        feature_names: data.features.names().to_vec(),
        members,
    })
}

impl LinearOvrModel {
    pub fn decision_values(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.members.iter().map(|m| m.decision_value(x)).collect()
    }

    pub fn predict(&self, x: &[f64]) -> Result<ClassCode> {
        Ok(argmax(&self.decision_values(x)?))
    }

    pub fn predict_all(&self, x: &FeatureMatrix) -> Result<Vec<ClassCode>> {
        (0..x.n_rows()).map(|r| self.predict(&x.row(r))).collect()
    }
}

pub fn predict_ovr(model: &LinearOvrModel, x: &[f64]) -> Result<ClassCode> {
    model.predict(x)
}
