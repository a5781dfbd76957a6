use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {shapes:?}")]
    Shape { op: String, shapes: Vec<Vec<usize>> },

    #[error("unknown primitive kind `{0}`")]
    UnknownPrimitive(String),

    #[error("primitive {0} has no forward-mode rule")]
    NoTangentRule(String),

    #[error("tensors belong to different graphs")]
    GraphMismatch,

    #[error("stale tensor handle: node {0} was discarded from its graph")]
    StaleNode(usize),

    #[error("backward root must be a scalar, got shape {0:?}")]
    NonScalarRoot(Vec<usize>),

    #[error("backward root is not attached to a graph")]
    DetachedRoot,

    #[error("gradients already computed on this graph; clear them first")]
    BackwardTwice,

    #[error("duplicate parameter name `{0}`")]
    DuplicateParam(String),

    #[error("missing parameter `{0}`")]
    MissingParam(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },

    #[error("step limit of {max_steps} exceeded while integrating [{t_start}, {t_end}] (stopped at t = {t})")]
    MaxSteps {
        max_steps: usize,
        t_start: f64,
        t_end: f64,
        t: f64,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: u64,
        msg: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("training aborted: {0}")]
    Training(String),
}

impl Error {
    pub(crate) fn shape(op: impl Into<String>, shapes: &[&[usize]]) -> Self {
        Error::Shape {
            op: op.into(),
            shapes: shapes.iter().map(|s| s.to_vec()).collect(),
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
