use thiserror::Error;

/// Errors raised across the identification pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid dataset: {0}")]
    InvalidData(String),

    /// The candidate selects no regressor, either as given or after pruning.
    #[error("empty model: no regressor selected")]
    EmptyModel,

    #[error("singular regression matrix")]
    SingularModel,

    #[error("free-run simulation diverged at sample {0}")]
    Diverged(usize),

    #[error("target is constant over the evaluation window")]
    DegenerateTarget,

    #[error("labels must be 0 or 1 (found {0})")]
    InvalidLabels(f64),

    #[error("both classes must be present")]
    DegenerateClasses,

    #[error("search aborted: {0}")]
    Aborted(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            Error::Io(e.to_string())
        } else {
            Error::InvalidData(e.to_string())
        }
    }
}
