use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate feature: column {0} is constant")]
    DegenerateFeature(usize),

    #[error("feature index {index} out of range for {p} features")]
    FeatureOutOfRange { index: usize, p: usize },

    #[error("unknown data-generating process '{0}'")]
    UnknownDgp(String),

    #[error("cycle detected in structural causal model at variable '{0}'")]
    CyclicGraph(String),

    #[error("exact Shapley enumeration supports at most {max} features, got {p}; use the sampled estimator")]
    TooManyFeatures { p: usize, max: usize },

    #[error("model fitting failed: {0}")]
    Fit(String),

    #[error("replicate {index} failed: {source}")]
    Replicate {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
