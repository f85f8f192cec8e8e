use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {}: {source}", path.display())]
    Storage {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Bad magic or unsupported version.
    #[error("format error: {0}")]
    Format(String),

    /// Header and payload disagree.
    #[error("corrupt embedding file: {0}")]
    Corrupt(String),

    #[error("validation error: {0}")]
    Validation(String),

    /// Dataset protocol violation, e.g. an anomalous video in the train split.
    #[error("protocol violation: {0}")]
    Protocol(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A caller broke a documented precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("lookup error: {0}")]
    Lookup(String),

    #[error("ROCAUC undefined for {scope}: {reason}")]
    UndefinedMetric { scope: String, reason: String },

    #[error("query {position}: {source}")]
    Query {
        position: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("video {video_id}: {source}")]
    Video {
        video_id: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn in_video(self, video_id: &str) -> Self {
        Error::Video {
            video_id: video_id.to_owned(),
            source: Box::new(self),
        }
    }

    /// Innermost error, unwrapping query/video context.
    pub fn root(&self) -> &Error {
        match self {
            Error::Query { source, .. } | Error::Video { source, .. } => source.root(),
            other => other,
        }
    }
}
