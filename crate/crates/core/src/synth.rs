//! Synthetic cohort with the column layout of a baseline clinical table.
//!
//! Diagnosis is drawn from class priors. Cognitive scores rise (MMSE falls)
//! with a three-tier severity: CN/SMC, EMCI/LMCI, AD. The two members of
//! each lower tier are told apart only by an interaction between ICV and
//! WholeBrain: the "upper" member's brain volume departs from the volume
//! its ICV predicts by a large amount in either direction. Both columns are
//! marginally independent of the label in sign, so a linear model cannot
//! use them, while axis-aligned trees can.

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream_rng, Rng};
use crate::stats::quartiles;
use crate::table::{Column, ColumnKind, DataTable, Schema, Values};

/// Baseline class counts (CN, SMC, EMCI, LMCI, AD).
pub const CLASS_COUNTS: [u32; 5] = [4850, 1416, 2968, 5236, 1738];
pub const CLASS_NAMES: [&str; 5] = ["CN", "SMC", "EMCI", "LMCI", "AD"];
pub const LABEL: &str = "DX_bl";

/// Columns whose rank correlation with the label is planted strong.
pub const STRONG_FEATURES: [&str; 3] = ["CDRSB", "FAQ", "ADASQ4"];
/// Columns planted independent of the label's direction.
pub const WEAK_FEATURES: [&str; 3] = ["AGE", "ICV", "WholeBrain"];
/// The interaction pair.
pub const INTERACTION_FEATURES: [&str; 2] = ["ICV", "WholeBrain"];

pub fn default_priors() -> [f64; 5] {
    let total: u32 = CLASS_COUNTS.iter().sum();
    CLASS_COUNTS.map(|c| c as f64 / total as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_rows: usize,
    pub priors: [f64; 5],
    /// Multiplier on the severity effect in cognitive scores.
    pub strong_signal: f64,
    /// Multiplier on the severity effect in biomarkers (APOE4, FDG, AV45, Ventricles).
    pub moderate_signal: f64,
    /// Multiplier on the ICV/WholeBrain departure separating paired classes.
    pub interaction_signal: f64,
    pub missing_rate: f64,
    pub outlier_rate: f64,
    pub outlier_magnitude: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_rows: 2000,
            priors: default_priors(),
            strong_signal: 1.0,
            moderate_signal: 1.0,
            interaction_signal: 1.0,
            missing_rate: 0.0,
            outlier_rate: 0.0,
            outlier_magnitude: 3.0,
            seed: 42,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.priors.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::Config("class priors must be non-negative".into()));
        }
        let sum: f64 = self.priors.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("class priors sum to {sum}, not 1")));
        }
        for (name, rate) in [("missing_rate", self.missing_rate), ("outlier_rate", self.outlier_rate)] {
            if !(0.0..1.0).contains(&rate) {
                return Err(Error::Config(format!("{name} must lie in [0, 1), got {rate}")));
            }
        }
        if !(self.outlier_magnitude > 0.0) {
            return Err(Error::Config("outlier_magnitude must be positive".into()));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: SynthConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn schema() -> Schema {
    use ColumnKind::*;
    let fields = [
        ("PTID", Identifier),
        ("AGE", Numeric),
        ("PTGENDER", Categorical),
        ("PTEDUCAT", Numeric),
        ("PTRACCAT", Categorical),
        ("PTETHCAT", Categorical),
        ("APOE4", Numeric),
        ("FDG", Numeric),
        ("AV45", Numeric),
        ("IMAGEUID", Identifier),
        ("WholeBrain", Numeric),
        ("Ventricles", Numeric),
        ("ICV", Numeric),
        ("CDRSB", Numeric),
        ("ADAS11", Numeric),
        ("MMSE", Numeric),
        ("ADASQ4", Numeric),
        ("FAQ", Numeric),
        (LABEL, Label),
    ];
    Schema::new(fields.iter().map(|(n, k)| (n.to_string(), *k)).collect())
        .expect("static schema has unique names")
}

struct Record {
    ptid: String,
    age: f64,
    gender: &'static str,
    educat: f64,
    race: &'static str,
    ethnicity: &'static str,
    apoe4: f64,
    fdg: f64,
    av45: f64,
    imageuid: f64,
    whole_brain: f64,
    ventricles: f64,
    icv: f64,
    cdrsb: f64,
    adas11: f64,
    mmse: f64,
    adasq4: f64,
    faq: f64,
    class: usize,
}

fn round_to(x: f64, step: f64) -> f64 {
    (x / step).round() * step
}

fn pick<T: Copy>(rng: &mut Rng, options: &[(T, f64)]) -> T {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for &(v, p) in options {
        acc += p;
        if u < acc {
            return v;
        }
    }
    options[options.len() - 1].0
}

fn normal(rng: &mut Rng, mean: f64, sd: f64) -> f64 {
    Normal::new(mean, sd).expect("finite positive sd").sample(rng)
}

fn draw_record(config: &SynthConfig, row: usize) -> Record {
    let mut rng = stream_rng(config.seed, row as u64);
    let classes: Vec<(usize, f64)> = config.priors.iter().copied().enumerate().collect();
    let class = pick(&mut rng, &classes);
    // CN, SMC → 0; EMCI, LMCI → 1; AD → 2
    let tier = [0.0, 0.0, 1.0, 1.0, 2.0][class];
    let paired_upper = class == 1 || class == 3;

    let s = tier * config.strong_signal;
    let cdrsb = round_to(normal(&mut rng, 0.3 + 2.2 * s, 0.9), 0.5).clamp(0.0, 18.0);
    let adas11 = normal(&mut rng, 6.0 + 5.5 * s, 3.0).round().clamp(0.0, 70.0);
    let mmse = normal(&mut rng, 29.0 - 2.6 * s, 1.5).round().clamp(0.0, 30.0);
    let adasq4 = normal(&mut rng, 2.5 + 2.4 * s, 1.6).round().clamp(0.0, 10.0);
    let faq = normal(&mut rng, 0.6 + 5.5 * s, 2.8).round().clamp(0.0, 30.0);

    let m = tier * config.moderate_signal;
    let allele_p = (0.15 + 0.1 * m).clamp(0.0, 1.0);
    let apoe4 = (0..2).filter(|_| rng.random::<f64>() < allele_p).count() as f64;
    let fdg = round_to(normal(&mut rng, 6.5 - 0.25 * m, 0.7), 1e-4);
    let av45 = round_to(normal(&mut rng, 1.1 + 0.08 * m, 0.2), 1e-4);
    let ventricles = normal(&mut rng, 36000.0 + 6000.0 * m, 18000.0).max(5000.0).round();

    // Interaction: ICV deviation is label-free; WholeBrain tracks it closely
    // except for the upper member of a pair, where it departs by 1–2 SD.
    let icv_z = normal(&mut rng, 0.0, 1.0);
    let departure = if paired_upper {
        let size = rng.random_range(1.0..2.0) * config.interaction_signal;
        if rng.random::<bool>() {
            size
        } else {
            -size
        }
    } else {
        normal(&mut rng, 0.0, 0.25)
    };
    let icv = (1.53e6 + 1.5e5 * icv_z).round();
    let whole_brain = (1.01e6 + 1.0e5 * (icv_z + departure)).round();

    let age = round_to(normal(&mut rng, 73.5, 7.0), 0.1);
    let gender = if rng.random::<f64>() < 0.52 { "Male" } else { "Female" };
    let educat = normal(&mut rng, 16.0, 2.8).round().clamp(6.0, 20.0);
    let race = pick(
        &mut rng,
        &[("White", 0.92), ("Black", 0.04), ("Asian", 0.02), ("More than one", 0.02)],
    );
    let ethnicity = pick(
        &mut rng,
        &[("Not Hisp/Latino", 0.95), ("Hisp/Latino", 0.04), ("Unknown", 0.01)],
    );
    let imageuid = (10_000 + row * 13 + rng.random_range(0..13)) as f64;

    Record {
        ptid: format!("S_{:06}", row + 1),
        age,
        gender,
        educat,
        race,
        ethnicity,
        apoe4,
        fdg,
        av45,
        imageuid,
        whole_brain,
        ventricles,
        icv,
        cdrsb,
        adas11,
        mmse,
        adasq4,
        faq,
        class,
    }
}

fn assemble(records: &[Record]) -> DataTable {
    let num = |f: fn(&Record) -> f64| Values::Numeric(records.iter().map(|r| Some(f(r))).collect());
    let text = |f: fn(&Record) -> String| Values::Text(records.iter().map(|r| Some(f(r))).collect());
    let values = vec![
        text(|r| r.ptid.clone()),
        num(|r| r.age),
        text(|r| r.gender.to_string()),
        num(|r| r.educat),
        text(|r| r.race.to_string()),
        text(|r| r.ethnicity.to_string()),
        num(|r| r.apoe4),
        num(|r| r.fdg),
        num(|r| r.av45),
        num(|r| r.imageuid),
        num(|r| r.whole_brain),
        num(|r| r.ventricles),
        num(|r| r.icv),
        num(|r| r.cdrsb),
        num(|r| r.adas11),
        num(|r| r.mmse),
        num(|r| r.adasq4),
        num(|r| r.faq),
        text(|r| CLASS_NAMES[r.class].to_string()),
    ];
    let columns = schema()
        .fields()
        .iter()
        .zip(values)
        .map(|((name, kind), values)| Column {
            name: name.clone(),
            kind: *kind,
            values,
        })
        .collect();
    DataTable::with_row_count(columns, records.len()).expect("generated columns are consistent")
}

/// Generates the cohort, then injects outliers and missing cells at the
/// configured rates (in that order).
pub fn generate(config: &SynthConfig) -> Result<DataTable> {
    config.validate()?;
    let records: Vec<Record> = (0..config.n_rows)
        .into_par_iter()
        .map(|r| draw_record(config, r))
        .collect();
    let mut table = assemble(&records);
    if config.outlier_rate > 0.0 {
        table = inject_outliers(
            &table,
            config.outlier_rate,
            config.outlier_magnitude,
            derive_seed(config.seed, 1),
        )?
        .0;
    }
    if config.missing_rate > 0.0 {
        table = inject_missing(&table, config.missing_rate, derive_seed(config.seed, 2))?.0;
    }
    Ok(table)
}

/// A cell position: row index and column name.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub row: usize,
    pub column: String,
}

fn is_injectable(c: &Column) -> bool {
    matches!(c.kind, ColumnKind::Numeric | ColumnKind::Categorical)
}

/// Masks each feature cell independently with probability `rate`. Labels
/// and identifiers are never masked. Returns the newly masked cells.
pub fn inject_missing(table: &DataTable, rate: f64, seed: u64) -> Result<(DataTable, Vec<Cell>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Config(format!("missing rate must lie in [0, 1), got {rate}")));
    }
    let mut mask = Vec::new();
    let mut columns = Vec::with_capacity(table.columns().len());
    for (j, c) in table.columns().iter().enumerate() {
        let mut c = c.clone();
        if is_injectable(&c) && rate > 0.0 {
            let mut rng = stream_rng(seed, j as u64);
            for r in 0..table.row_count() {
                if rng.random::<f64>() < rate && !c.values.is_missing(r) {
                    match &mut c.values {
                        Values::Numeric(v) => v[r] = None,
                        Values::Text(v) => v[r] = None,
                    }
                    mask.push(Cell {
                        row: r,
                        column: c.name.clone(),
                    });
                }
            }
        }
        columns.push(c);
    }
    Ok((DataTable::with_row_count(columns, table.row_count())?, mask))
}

/// Pushes randomly chosen numeric feature cells `magnitude` spreads beyond
/// the column's 1.5·IQR fences, where the spread is the IQR (or 1 when the
/// IQR is zero). Returns the displaced cells.
pub fn inject_outliers(
    table: &DataTable,
    rate: f64,
    magnitude: f64,
    seed: u64,
) -> Result<(DataTable, Vec<Cell>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Config(format!("outlier rate must lie in [0, 1), got {rate}")));
    }
    if !(magnitude > 0.0) {
        return Err(Error::Config("outlier magnitude must be positive".into()));
    }
    let mut positions = Vec::new();
    let mut columns = Vec::with_capacity(table.columns().len());
    for (j, c) in table.columns().iter().enumerate() {
        let mut c = c.clone();
        if c.kind == ColumnKind::Numeric && rate > 0.0 {
            if let Values::Numeric(v) = &mut c.values {
                if let Some((q1, _, q3)) = quartiles(v.iter().flatten().copied()) {
                    let iqr = q3 - q1;
                    let spread = if iqr > 0.0 { iqr } else { 1.0 };
                    let (lower, upper) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
                    let mut rng = stream_rng(seed, j as u64);
                    for (r, cell) in v.iter_mut().enumerate() {
                        let hit = rng.random::<f64>() < rate;
                        let up = rng.random::<bool>();
                        if hit && cell.is_some() {
                            *cell = Some(if up {
                                upper + magnitude * spread
                            } else {
                                lower - magnitude * spread
                            });
                            positions.push(Cell {
                                row: r,
                                column: c.name.clone(),
                            });
                        }
                    }
                }
            }
        }
        columns.push(c);
    }
    Ok((DataTable::with_row_count(columns, table.row_count())?, positions))
}
