//! Spearman rank correlation and feature screening against the label.
//!
//! `spearman` is the Pearson correlation of average ranks, which is exact in
//! the presence of ties and equals the rank-difference formula
//! `1 - 6 Σ d² / (n (n² - 1))` when there are none.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::DataTable;

/// |ρ| above this is a strong association.
pub const STRONG_THRESHOLD: f64 = 0.45;
/// |ρ| below this is a weak association.
pub const WEAK_THRESHOLD: f64 = 0.1;
/// |ρ| below this has no meaningful sign.
pub const ZERO_TOLERANCE: f64 = 1e-12;

/// 1-based average ranks.
#[derive(Debug, Clone, PartialEq)]
pub struct RankVector {
    pub ranks: Vec<f64>,
}

impl RankVector {
    pub fn n(&self) -> usize {
        self.ranks.len()
    }
}

pub fn rank_average(values: &[f64]) -> Result<RankVector> {
    if values.is_empty() {
        return Err(Error::Correlation("cannot rank an empty vector".into()));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::Correlation(format!("cannot rank non-finite value {v}")));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // positions i+1 ..= j share their mean rank
        let rank = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        i = j;
    }
    Ok(RankVector { ranks })
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Correlation(format!(
            "length mismatch ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::Correlation("need at least two observations".into()));
    }
    Ok(())
}

/// Spearman's ρ computed as Pearson correlation of average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let rx = rank_average(x)?;
    let ry = rank_average(y)?;
    pearson(&rx.ranks, &ry.ranks)
        .ok_or_else(|| Error::Correlation("constant input vector".into()))
}

/// Spearman's ρ from squared rank differences. Exact only without ties.
pub fn spearman_rank_difference(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let rx = rank_average(x)?;
    let ry = rank_average(y)?;
    let n = x.len() as f64;
    let sum_d2: f64 = rx.ranks.iter().zip(&ry.ranks).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(1.0 - 6.0 * sum_d2 / (n * (n * n - 1.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Strength {
    Strong,
    Moderate,
    Weak,
}

impl Strength {
    pub fn classify(rho: f64) -> Self {
        let a = rho.abs();
        if a > STRONG_THRESHOLD {
            Strength::Strong
        } else if a < WEAK_THRESHOLD {
            Strength::Weak
        } else {
            Strength::Moderate
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Strength::Strong => "Strong",
            Strength::Moderate => "Moderate",
            Strength::Weak => "Weak",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Positive,
    Negative,
    Zero,
}

impl Sign {
    pub fn of(rho: f64) -> Self {
        if rho.abs() < ZERO_TOLERANCE {
            Sign::Zero
        } else if rho > 0.0 {
            Sign::Positive
        } else {
            Sign::Negative
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Sign::Positive => "Positive",
            Sign::Negative => "Negative",
            Sign::Zero => "Zero",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureCorrelation {
    pub feature: String,
    pub rho: f64,
    pub strength: Strength,
    pub sign: Sign,
}

/// Features ordered by |ρ| descending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub label: String,
    pub entries: Vec<FeatureCorrelation>,
}

impl CorrelationReport {
    pub fn get(&self, feature: &str) -> Option<&FeatureCorrelation> {
        self.entries.iter().find(|e| e.feature == feature)
    }

    /// `feature,rho,strength,sign,rank` with rank starting at 1.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("feature,rho,strength,sign,rank\r\n");
        for (i, e) in self.entries.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{}\r\n",
                csv_field(&e.feature),
                e.rho,
                e.strength.as_str(),
                e.sign.as_str(),
                i + 1
            ));
        }
        out
    }
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\r', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn named_error(name: &str, e: Error) -> Error {
    match e {
        Error::Correlation(msg) => Error::Correlation(format!("column {name}: {msg}")),
        other => other,
    }
}

/// Correlates each feature with the label and ranks by |ρ|. Equal
/// magnitudes keep input order.
pub fn classify_and_rank(
    label_name: &str,
    label: &[f64],
    features: &[(String, Vec<f64>)],
) -> Result<CorrelationReport> {
    let mut entries = features
        .par_iter()
        .map(|(name, values)| {
            let rho = spearman(values, label).map_err(|e| named_error(name, e))?;
            Ok(FeatureCorrelation {
                feature: name.clone(),
                rho,
                strength: Strength::classify(rho),
                sign: Sign::of(rho),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    entries.sort_by(|a, b| b.rho.abs().total_cmp(&a.rho.abs()));
    Ok(CorrelationReport {
        label: label_name.to_string(),
        entries,
    })
}

/// Spearman ρ of every named column against the label column of `table`.
pub fn correlate_with_label(table: &DataTable, label: &str, features: &[String]) -> Result<CorrelationReport> {
    let y = table.require(label)?.dense()?;
    let cols = features
        .iter()
        .map(|f| Ok((f.clone(), table.require(f)?.dense()?)))
        .collect::<Result<Vec<_>>>()?;
    classify_and_rank(label, &y, &cols)
}

/// Symmetric matrix of pairwise ρ with a unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl CorrelationMatrix {
    /// Header row and column of names.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(
            &std::iter::once(String::new())
                .chain(self.names.iter().map(|n| csv_field(n)))
                .collect::<Vec<_>>()
                .join(","),
        );
        out.push_str("\r\n");
        for (name, row) in self.names.iter().zip(&self.values) {
            out.push_str(&csv_field(name));
            for v in row {
                out.push(',');
                out.push_str(&v.to_string());
            }
            out.push_str("\r\n");
        }
        out
    }
}

/// Pairwise ρ over all columns of a fully observed numeric table.
pub fn correlation_matrix(table: &DataTable) -> Result<CorrelationMatrix> {
    let names: Vec<String> = table.names().into_iter().map(String::from).collect();
    let ranks = table
        .columns()
        .iter()
        .map(|c| {
            let r = rank_average(&c.dense()?).map_err(|e| named_error(&c.name, e))?;
            Ok(r.ranks)
        })
        .collect::<Result<Vec<_>>>()?;
    for (name, r) in names.iter().zip(&ranks) {
        if r.len() >= 2 && r.iter().all(|&v| v == r[0]) {
            return Err(Error::Correlation(format!("column {name}: constant input vector")));
        }
    }
    let p = names.len();
    let pairs: Vec<(usize, usize)> = (0..p).flat_map(|i| (i + 1..p).map(move |j| (i, j))).collect();
    let rhos = pairs
        .par_iter()
        .map(|&(i, j)| {
            pearson(&ranks[i], &ranks[j])
                .ok_or_else(|| Error::Correlation(format!("columns {} and {}", names[i], names[j])))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut values = vec![vec![0.0; p]; p];
    for (i, row) in values.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for (&(i, j), rho) in pairs.iter().zip(rhos) {
        values[i][j] = rho;
        values[j][i] = rho;
    }
    Ok(CorrelationMatrix { names, values })
}
