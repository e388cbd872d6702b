use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid jet case: {0}")]
    Validation(String),
    #[error("oscillatory convergence: {0}")]
    Convergence(String),
    #[error("degenerate grid study: {0}")]
    Degenerate(String),
    #[error("integration did not terminate within s_max = {s_max} m")]
    Divergence { s_max: f64 },
    #[error("numeric failure during integration at s = {s}: {reason}")]
    Numeric { s: f64, reason: String },
    #[error("centerline shape error: {0}")]
    Shape(String),
    #[error("centerline truncated: {0}")]
    Truncation(String),
    #[error("sampling exhausted: {found} of {requested} cases after {draws} draws")]
    SamplingExhausted {
        requested: usize,
        found: usize,
        draws: usize,
    },
    #[error("oracle failed on {failed} of {total} cases (first failure: {first})")]
    OracleFailures {
        failed: usize,
        total: usize,
        first: String,
    },
    #[error("record {row} rejected: {reason}")]
    InvalidRecord { row: usize, reason: String },
    #[error("correlation undefined for constant column `{0}`")]
    UndefinedCorrelation(String),
    #[error("R² undefined: observed values are constant")]
    UndefinedR2,
    #[error("data error: {0}")]
    Data(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("grid search failed: {0}")]
    Search(String),
    #[error("capability exceeded: {0}")]
    Capability(String),
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("size error: {0}")]
    Size(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("io error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable machine-readable kind used in CLI error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Validation(_) => "validation",
            Error::Convergence(_) => "convergence",
            Error::Degenerate(_) => "degenerate",
            Error::Divergence { .. } => "divergence",
            Error::Numeric { .. } => "numeric",
            Error::Shape(_) => "shape",
            Error::Truncation(_) => "truncation",
            Error::SamplingExhausted { .. } => "sampling_exhausted",
            Error::OracleFailures { .. } => "oracle_failures",
            Error::InvalidRecord { .. } => "invalid_record",
            Error::UndefinedCorrelation(_) => "undefined_correlation",
            Error::UndefinedR2 => "undefined_r2",
            Error::Data(_) => "data",
            Error::ShapeMismatch(_) => "shape_mismatch",
            Error::Search(_) => "search",
            Error::Capability(_) => "capability",
            Error::UnknownFeature(_) => "unknown_feature",
            Error::Size(_) => "size",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}
