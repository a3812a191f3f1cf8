use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("corpus has no valid rows")]
    EmptyCorpus,
    #[error("corpus has a single label class {0:?}; at least two are required")]
    DegenerateCorpus(String),
    #[error("n = {0} has no default repeat count; supply an override")]
    UnsupportedN(usize),
    #[error("infeasible plan: need {needed} documents (2n + m), corpus has {available} (short by {})", needed - available)]
    Infeasible { needed: usize, available: usize },
    #[error("cannot stratify: m = {m} is smaller than the {classes} label classes")]
    Stratification { m: usize, classes: usize },
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("trial {trial} failed: {reason}; stderr: {stderr}")]
    TrialFailure {
        trial: String,
        reason: String,
        stderr: String,
    },
    #[error("trainer protocol error: {0}")]
    Protocol(String),
    #[error("every trial failed ({0} attempted)")]
    ExperimentFailed(usize),
    #[error("invalid model design: {0}")]
    Design(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("sampler initialization failed: {0}")]
    Init(String),
    #[error("sampler failure: {0}")]
    Sampler(String),
    #[error("pairing error: {0}")]
    Pairing(String),
    #[error("index error: {0}")]
    Index(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("task {0:?} has no records")]
    MissingTask(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag for the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
            Error::EmptyCorpus => "empty_corpus",
            Error::DegenerateCorpus(_) => "degenerate_corpus",
            Error::UnsupportedN(_) => "unsupported_n",
            Error::Infeasible { .. } => "infeasible_plan",
            Error::Stratification { .. } => "stratification",
            Error::InvalidPlan(_) => "invalid_plan",
            Error::TrialFailure { .. } => "trial_failure",
            Error::Protocol(_) => "protocol",
            Error::ExperimentFailed(_) => "experiment_failed",
            Error::Design(_) => "design",
            Error::Domain(_) => "domain",
            Error::Init(_) => "init",
            Error::Sampler(_) => "sampler",
            Error::Pairing(_) => "pairing",
            Error::Index(_) => "index",
            Error::Config(_) => "config",
            Error::Invalid(_) => "invalid_input",
            Error::MissingTask(_) => "missing_task",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
