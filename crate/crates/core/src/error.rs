use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("argument outside the domain of definition: {0}")]
    Domain(String),

    #[error("kernel evaluated at coincident points; use the regularized path")]
    CoincidentPoints,

    #[error("element {element} is inverted (jacobian {jacobian:e})")]
    InvertedElement { element: usize, jacobian: f64 },

    #[error("coupling mismatch: {0}")]
    Coupling(String),

    #[error("singular matrix: pivot {pivot:e} at column {column} (estimated condition >= {condition:e})")]
    Singular {
        column: usize,
        pivot: f64,
        condition: f64,
    },

    #[error("relative error undefined: reference integral vanishes")]
    UndefinedRelativeError,

    #[error("point ({x}, {y}) lies outside the mesh")]
    OutsideMesh { x: f64, y: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed field file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
