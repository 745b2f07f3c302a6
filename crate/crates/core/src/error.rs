use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: column {column}: cannot parse {value:?} as a number")]
    ParseNumber {
        line: usize,
        column: String,
        value: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("column {column}: category {category:?} has no code")]
    Encoding { column: String, category: String },

    #[error("cannot fit scaling: {0}")]
    Fit(String),

    #[error("column {0}: degenerate scale (x_max == x_min)")]
    DegenerateScale(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("imputation failed: {0}")]
    Imputation(String),

    #[error("training failed: {0}")]
    Training(String),

    #[error("prediction failed: {0}")]
    Prediction(String),

    #[error("correlation undefined: {0}")]
    Correlation(String),

    #[error("split failed: {0}")]
    Split(String),

    #[error("repeat {repeat}: {source}")]
    Repeat {
        repeat: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    /// True for errors caused by bad flags or configuration rather than by the data.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_) | Error::Toml(_) => true,
            Error::Repeat { source, .. } | Error::Stage { source, .. } => source.is_config(),
            _ => false,
        }
    }
}

/// Attaches a pipeline stage name to an error.
pub fn in_stage<T>(stage: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Stage {
        stage,
        source: Box::new(e),
    })
}

pub type Result<T> = std::result::Result<T, Error>;
