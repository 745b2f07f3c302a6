//! Tabular diagnosis pipeline: typed CSV tables, missing-value and outlier
//! handling, Spearman screening, and three classifier families (bagged CART
//! forests, second-order gradient-boosted trees, one-vs-rest linear SVMs)
//! evaluated under repeated train/test splits.

pub mod cart;
pub mod config;
pub mod correlation;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod forest;
pub mod gbt;
pub mod preprocess;
pub mod rng;
pub mod stats;
pub mod svm;
pub mod synth;
pub mod table;

pub use error::{Error, Result};
