use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("{what} index {index} out of range (len {len})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid clustering: {0}")]
    InvalidClustering(String),

    #[error("degenerate clustering: no blendshape mass is kept")]
    DegenerateClustering,

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("infeasible generator spec: {0}")]
    InfeasibleSpec(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("roughness needs at least 3 frames, got {0}")]
    TooFewFrames(usize),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("frame {index}: {source}")]
    Frame {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("model file: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures that come from the numbers rather than from the
    /// shape or validity of the inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Frame { source, .. } => source.is_numerical(),
            other => matches!(other, Error::DegenerateClustering | Error::NonFinite(_)),
        }
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            got,
        })
    }
}
