use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("matrix is singular: {0}")]
    Singular(String),

    #[error("{0} did not converge")]
    NonConvergence(String),

    #[error("eigendecomposition is defective (condition number of eigenvector matrix {cond:e})")]
    Defective { cond: f64 },

    #[error("solver residual check failed in {context}: {detail}")]
    ResidualCheck { context: String, detail: String },

    #[error("problem is infeasible: {0}")]
    Infeasible(String),

    #[error("problem is unbounded: {0}")]
    Unbounded(String),

    #[error("assumption violated: {0}")]
    Assumption(String),

    #[error("certificate rejected: {0}")]
    Rejected(String),

    #[error("vertex enumeration cap exceeded: {0}")]
    VertexCap(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Dimension(_) => "dimension",
            Error::InvalidArgument(_) => "invalid-argument",
            Error::NotPositiveDefinite(_) => "not-positive-definite",
            Error::Singular(_) => "singular",
            Error::NonConvergence(_) => "non-convergence",
            Error::Defective { .. } => "defective",
            Error::ResidualCheck { .. } => "residual-check",
            Error::Infeasible(_) => "infeasible",
            Error::Unbounded(_) => "unbounded",
            Error::Assumption(_) => "assumption",
            Error::Rejected(_) => "rejected",
            Error::VertexCap(_) => "vertex-cap",
            Error::Numeric(_) => "numeric",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
