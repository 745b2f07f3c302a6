mod manifest;
mod plot;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use tabdx::config::load_toml;
use tabdx::correlation::{correlate_with_label, correlation_matrix};
use tabdx::dataset::{class_codes, feature_names};
use tabdx::error::{in_stage, Error};
use tabdx::eval::{compare_models, fit_model, Hyperparams, ModelFamily, SplitSpec};
use tabdx::preprocess::{run_pipeline, PipelineConfig};
use tabdx::rng::stage_seed;
use tabdx::synth::{generate, SynthConfig};
use tabdx::table::{read_csv, write_csv, Column, ColumnKind, DataTable, Schema};

use manifest::Recorder;

#[derive(Parser)]
#[command(name = "tabdx", version, about = "Tabular diagnosis pipeline")]
struct Cli {
    /// Worker threads for parallel stages (0 = all cores).
    #[arg(long, global = true, env = "TABDX_THREADS", default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic cohort.
    Synth(SynthArgs),
    /// Clean a cohort: drops, imputation, outliers, pruning, encoding.
    Preprocess(PreprocessArgs),
    /// Spearman correlation of each feature with the label.
    Correlate(CorrelateArgs),
    /// Fit one model on the whole table and save it.
    Train(TrainArgs),
    /// Repeated train/test evaluation and model ranking.
    Evaluate(EvaluateArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Input CSV.
    #[arg(long)]
    input: PathBuf,
    /// Column kinds; defaults to the input path with a `.schema` extension.
    #[arg(long)]
    schema: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// TOML preset; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    missing_rate: Option<f64>,
    #[arg(long)]
    outlier_rate: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PreprocessArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    max_missing: Option<usize>,
    #[arg(long)]
    missing_threshold: Option<f64>,
    #[arg(long)]
    dominance_threshold: Option<f64>,
    /// Min-max scale numeric features in the output.
    #[arg(long)]
    scale: bool,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct CorrelateArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Label column; defaults to the schema's label.
    #[arg(long)]
    label: Option<String>,
    /// Identifier columns to treat as features.
    #[arg(long, value_delimiter = ',')]
    whitelist: Vec<String>,
    #[arg(long)]
    plot: bool,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ModelArgs {
    /// Hyperparameter TOML with [forest], [gbt] and [svm] tables.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    label: Option<String>,
    #[arg(long, value_delimiter = ',')]
    whitelist: Vec<String>,
    #[arg(long)]
    trees: Option<usize>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    svm_lambda: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_parser = parse_family)]
    model: ModelFamily,
    #[command(flatten)]
    params: ModelArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_delimiter = ',', value_parser = parse_family, default_value = "forest,gbt,svm")]
    models: Vec<ModelFamily>,
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    #[arg(long, default_value_t = 0.3)]
    test_fraction: f64,
    #[arg(long)]
    stratified: bool,
    #[command(flatten)]
    params: ModelArgs,
    #[arg(long)]
    plot: bool,
    #[arg(long)]
    out_dir: PathBuf,
}

fn parse_family(s: &str) -> Result<ModelFamily, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: if e.is_config() { 2 } else { 3 },
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure {
            code: 3,
            message: format!("io: {e}"),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
        eprintln!("error: cannot start thread pool: {e}");
        return ExitCode::from(3);
    }
    let result = match cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Preprocess(a) => cmd_preprocess(a),
        Command::Correlate(a) => cmd_correlate(a),
        Command::Train(a) => cmd_train(a),
        Command::Evaluate(a) => cmd_evaluate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn schema_path(csv: &Path) -> PathBuf {
    csv.with_extension("schema")
}

fn csv_bytes(table: &DataTable) -> Result<Vec<u8>, Error> {
    let mut out = Vec::new();
    write_csv(&mut out, table)?;
    Ok(out)
}

fn create_dir(dir: &Path) -> CmdResult {
    fs::create_dir_all(dir).map_err(|e| Failure {
        code: 3,
        message: format!("cannot create {}: {e}", dir.display()),
    })
}

/// Loads the input table and records its digests.
fn load_input(args: &InputArgs, rec: &mut Recorder) -> Result<DataTable, Error> {
    in_stage("load", (|| {
        let schema_file = args.schema.clone().unwrap_or_else(|| schema_path(&args.input));
        let schema_text = fs::read_to_string(&schema_file).map_err(|e| {
            Error::Schema(format!("cannot read schema {}: {e}", schema_file.display()))
        })?;
        let schema = Schema::parse(&schema_text)?;
        let bytes = fs::read(&args.input)?;
        rec.input(&args.input, &bytes);
        rec.input(&schema_file, schema_text.as_bytes());
        read_csv(bytes.as_slice(), &schema)
    })())
}

/// Makes `name` the label column; any previous label becomes an identifier.
fn relabel(table: DataTable, name: Option<&str>) -> Result<DataTable, Error> {
    let Some(name) = name else { return Ok(table) };
    if table.column(name).is_none() {
        return Err(Error::Schema(format!("label column {name} not found")));
    }
    let row_count = table.row_count();
    let columns = table
        .into_columns()
        .into_iter()
        .map(|c| {
            let kind = if c.name == name {
                ColumnKind::Label
            } else if c.kind == ColumnKind::Label {
                ColumnKind::Identifier
            } else {
                c.kind
            };
            Column { kind, ..c }
        })
        .collect();
    DataTable::with_row_count(columns, row_count)
}

fn cmd_synth(a: SynthArgs) -> CmdResult {
    let mut cfg: SynthConfig = match &a.config {
        Some(p) => load_toml(p)?,
        None => SynthConfig::default(),
    };
    cfg.seed = a.seed;
    if let Some(n) = a.rows {
        cfg.n_rows = n;
    }
    if let Some(r) = a.missing_rate {
        cfg.missing_rate = r;
    }
    if let Some(r) = a.outlier_rate {
        cfg.outlier_rate = r;
    }
    cfg.validate()?;
    let mut rec = Recorder::new("synth", a.seed, &cfg);
    let table = rec.time("generate", || in_stage("synth", generate(&cfg)))?;
    rec.write(&a.out, &in_stage("write", csv_bytes(&table))?)?;
    rec.write(&schema_path(&a.out), table.schema().to_string().as_bytes())?;
    rec.finish(&a.out.with_extension("manifest.json"))?;
    Ok(())
}

#[derive(Serialize)]
struct PreprocessSummary<'a> {
    run_id: String,
    rows_in: usize,
    rows_out: usize,
    dropped_columns: &'a [String],
    dropped_records: usize,
    imputed_cells: usize,
    outliers_replaced: usize,
    pruned_columns: Vec<&'a str>,
    encodings: &'a [tabdx::table::EncodingMap],
    scaling: Option<&'a tabdx::table::MinMaxScaler>,
}

fn cmd_preprocess(a: PreprocessArgs) -> CmdResult {
    let mut cfg: PipelineConfig = match &a.config {
        Some(p) => load_toml(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(m) = a.max_missing {
        cfg.max_missing = m;
    }
    if let Some(t) = a.missing_threshold {
        cfg.missing_column_threshold = t;
    }
    if let Some(t) = a.dominance_threshold {
        cfg.dominance_threshold = t;
    }
    cfg.scale |= a.scale;
    cfg.seed = stage_seed(a.seed, "impute");
    cfg.validate()?;
    create_dir(&a.out_dir)?;
    let mut rec = Recorder::new("preprocess", a.seed, &cfg);
    let table = load_input(&a.input, &mut rec)?;
    let out = rec.time("pipeline", || in_stage("preprocess", run_pipeline(&table, &cfg)))?;
    let dir = &a.out_dir;
    rec.write(&dir.join("clean.csv"), &in_stage("write", csv_bytes(&out.table))?)?;
    rec.write(&dir.join("clean.schema"), out.table.schema().to_string().as_bytes())?;
    rec.write(&dir.join("missingness.csv"), out.missingness.to_csv()?.as_bytes())?;
    rec.write(&dir.join("outliers.csv"), out.outliers.to_csv()?.as_bytes())?;
    rec.write(&dir.join("prune.csv"), out.prune.to_csv()?.as_bytes())?;
    let summary = PreprocessSummary {
        run_id: rec.run_id(),
        rows_in: table.row_count(),
        rows_out: out.table.row_count(),
        dropped_columns: &out.dropped_columns,
        dropped_records: out.dropped_records,
        imputed_cells: out.imputed_cells,
        outliers_replaced: out.outliers.total_replaced(),
        pruned_columns: out.prune.pruned.iter().map(|p| p.column.as_str()).collect(),
        encodings: &out.encodings,
        scaling: out.scaler.as_ref(),
    };
    let json = serde_json::to_string_pretty(&summary).map_err(Error::from)? + "\n";
    rec.write(&dir.join("summary.json"), json.as_bytes())?;
    rec.finish(&dir.join("manifest.json"))?;
    Ok(())
}

#[derive(Serialize)]
struct CorrelateConfig<'a> {
    label: Option<&'a str>,
    whitelist: &'a [String],
    plot: bool,
}

fn cmd_correlate(a: CorrelateArgs) -> CmdResult {
    create_dir(&a.out_dir)?;
    let mut rec = Recorder::new(
        "correlate",
        0,
        CorrelateConfig {
            label: a.label.as_deref(),
            whitelist: &a.whitelist,
            plot: a.plot,
        },
    );
    let table = load_input(&a.input, &mut rec)?;
    let table = in_stage("load", relabel(table, a.label.as_deref()))?;
    let label = in_stage("load", table.label())?.name.clone();
    let features = feature_names(&table, &a.whitelist);
    let (report, matrix) = rec.time("correlate", || -> Result<_, Error> {
        let report = in_stage("correlate", correlate_with_label(&table, &label, &features))?;
        let mut cols: Vec<String> = features.clone();
        cols.push(label.clone());
        let keep: Vec<String> = table
            .names()
            .into_iter()
            .filter(|n| !cols.iter().any(|c| c == n))
            .map(String::from)
            .collect();
        let matrix = in_stage("correlate", correlation_matrix(&table.drop_columns(&keep)))?;
        Ok((report, matrix))
    })?;
    rec.write(&a.out_dir.join("correlations.csv"), report.to_csv().as_bytes())?;
    rec.write(&a.out_dir.join("heatmap.csv"), matrix.to_csv().as_bytes())?;
    if a.plot {
        let bars: Vec<(String, f64)> = report.entries.iter().map(|e| (e.feature.clone(), e.rho)).collect();
        let svg = plot::bar_chart(&format!("Spearman rho with {label}"), &bars, -1.0, 1.0);
        rec.write(&a.out_dir.join("correlations.svg"), svg.as_bytes())?;
        let svg = plot::heatmap("Spearman correlation matrix", &matrix.names, &matrix.values);
        rec.write(&a.out_dir.join("heatmap.svg"), svg.as_bytes())?;
    }
    rec.finish(&a.out_dir.join("manifest.json"))?;
    Ok(())
}

/// Hyperparameters from the optional TOML file, flag overrides and the
/// per-stage seeds derived from `--seed`.
fn hyperparams(p: &ModelArgs) -> Result<Hyperparams, Error> {
    let mut hp: Hyperparams = match &p.config {
        Some(path) => load_toml(path)?,
        None => Hyperparams::default(),
    };
    if !p.whitelist.is_empty() {
        hp.whitelist = p.whitelist.clone();
    }
    if let Some(n) = p.trees {
        hp.forest.n_trees = n;
    }
    if let Some(n) = p.rounds {
        hp.gbt.n_rounds = n;
    }
    if let Some(v) = p.learning_rate {
        hp.gbt.learning_rate = v;
    }
    if let Some(v) = p.svm_lambda {
        hp.svm.lambda = v;
    }
    if let Some(n) = p.epochs {
        hp.svm.epochs = n;
    }
    hp.forest.seed = stage_seed(p.seed, "forest");
    hp.svm.seed = stage_seed(p.seed, "svm");
    hp.forest.validate(usize::MAX)?;
    hp.gbt.validate()?;
    hp.svm.validate()?;
    Ok(hp)
}

#[derive(Serialize)]
struct ModelFile<'a> {
    run_id: String,
    label: &'a str,
    #[serde(flatten)]
    fitted: &'a tabdx::eval::FittedModel,
}

fn cmd_train(a: TrainArgs) -> CmdResult {
    let hp = hyperparams(&a.params)?;
    let mut rec = Recorder::new("train", a.params.seed, serde_json::json!({ "model": a.model, "hyperparams": hp }));
    let table = load_input(&a.input, &mut rec)?;
    let table = in_stage("load", relabel(table, a.params.label.as_deref()))?;
    let label = in_stage("load", table.label())?.name.clone();
    let n_classes = in_stage("train", class_codes(table.label()?))?
        .into_iter()
        .max()
        .unwrap_or(0);
    let fitted = rec.time("train", || in_stage("train", fit_model(a.model, &table, &hp, n_classes)))?;
    let file = ModelFile {
        run_id: rec.run_id(),
        label: &label,
        fitted: &fitted,
    };
    let json = serde_json::to_string(&file).map_err(Error::from)? + "\n";
    rec.write(&a.out, json.as_bytes())?;
    rec.finish(&a.out.with_extension("manifest.json"))?;
    Ok(())
}

fn cmd_evaluate(a: EvaluateArgs) -> CmdResult {
    let hp = hyperparams(&a.params)?;
    let spec = SplitSpec {
        train_fraction: 1.0 - a.test_fraction,
        repeats: a.repeats,
        base_seed: stage_seed(a.params.seed, "split"),
        stratified: a.stratified,
    };
    spec.validate()?;
    let mut models = a.models.clone();
    models.dedup();
    create_dir(&a.out_dir)?;
    let mut rec = Recorder::new(
        "evaluate",
        a.params.seed,
        serde_json::json!({ "models": models, "split": spec, "hyperparams": hp }),
    );
    let table = load_input(&a.input, &mut rec)?;
    let table = in_stage("load", relabel(table, a.params.label.as_deref()))?;
    let (reports, comparison) =
        rec.time("evaluate", || in_stage("evaluate", compare_models(&table, &spec, &hp, &models)))?;
    for r in &reports {
        rec.write(&a.out_dir.join(format!("eval_{}.csv", r.model)), r.to_csv().as_bytes())?;
        if a.plot {
            let svg = plot::line_chart(
                &format!("{} accuracy per repeat", r.model),
                &[("train", &r.train_acc), ("test", &r.test_acc)],
                0.0,
                1.0,
            );
            rec.write(&a.out_dir.join(format!("eval_{}.svg", r.model)), svg.as_bytes())?;
        }
    }
    rec.write(&a.out_dir.join("comparison.csv"), comparison.to_csv().as_bytes())?;
    if a.plot {
        let bars: Vec<(String, f64)> = comparison
            .ranking
            .iter()
            .map(|r| (r.model.clone(), r.mean_test_acc))
            .collect();
        let svg = plot::bar_chart("Mean test accuracy", &bars, 0.0, 1.0);
        rec.write(&a.out_dir.join("comparison.svg"), svg.as_bytes())?;
    }
    rec.finish(&a.out_dir.join("manifest.json"))?;
    Ok(())
}
