use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad invocation or configuration, detected before any work starts.
    #[error("usage error: {0}")]
    Usage(String),

    /// Malformed, missing or inconsistent input data.
    #[error("data error: {0}")]
    Data(String),

    /// Non-finite loss, feature or coefficient.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// A caller broke an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A pluggable component (decoder, face detector) failed on one unit.
    #[error("{component} failed on {unit}: {message}")]
    Component {
        component: String,
        unit: String,
        message: String,
    },

    #[error("stage `{stage}` failed for video `{video_id}`: {source}")]
    Stage {
        stage: &'static str,
        video_id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn in_stage(self, stage: &'static str, video_id: &str) -> Self {
        Error::Stage {
            stage,
            video_id: video_id.to_string(),
            source: Box::new(self),
        }
    }

    /// Process exit code: 1 usage, 2 data, 3 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 1,
            Error::Numeric(_) => 3,
            Error::Stage { source, .. } => source.exit_code(),
            Error::Data(_) | Error::Contract(_) | Error::Component { .. } | Error::Io { .. } => 2,
        }
    }
}
