use thiserror::Error;

pub type Result<T> = std::result::Result<T, HarnessError>;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    /// Malformed dump or config; `row` is the 0-based data row or config line.
    #[error("parse error in {source_name} at row {row}: {message}")]
    Parse {
        source_name: String,
        row: usize,
        message: String,
    },
    #[error("parse error in {source_name}: {message}")]
    ParseHeader { source_name: String, message: String },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("verification failed: {}", .0.join(", "))]
    Verification(Vec<String>),
    #[error(transparent)]
    Core(#[from] topnsigma::Error),
    #[error("output error: {0}")]
    Output(String),
}

impl HarnessError {
    /// Process exit status: 2 invalid parameters, 3 parse errors,
    /// 4 verification failures, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::InvalidParameter(_) => 2,
            HarnessError::Core(topnsigma::Error::InvalidParameter(_)) => 2,
            HarnessError::Core(topnsigma::Error::Domain(_)) => 2,
            HarnessError::Parse { .. } | HarnessError::ParseHeader { .. } => 3,
            HarnessError::Verification(_) => 4,
            _ => 1,
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<csv::Error> for HarnessError {
    fn from(e: csv::Error) -> Self {
        HarnessError::Output(e.to_string())
    }
}

impl From<serde_json::Error> for HarnessError {
    fn from(e: serde_json::Error) -> Self {
        HarnessError::Output(e.to_string())
    }
}
