use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the library can report. Validation variants carry the name
/// of the violated invariant in their message so the CLI can surface it.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),

    #[error("vertex index {index} out of range for {n} vertices")]
    VertexOutOfRange { index: usize, n: usize },

    #[error("duplicate vertex label `{0}`")]
    DuplicateVertex(String),

    #[error("non-finite value at position {0}")]
    NonFinite(usize),

    #[error("degenerate dipole: both endpoints are `{0}`")]
    DegenerateDipole(String),

    #[error("loop edge at vertex `{0}`")]
    LoopEdge(String),

    #[error("duplicate edge {0} -- {1}")]
    DuplicateEdge(String, String),

    #[error("nonpositive conductance {c} on edge {u} -- {v}")]
    NonPositiveConductance { u: String, v: String, c: f64 },

    #[error("network is disconnected: {reached} of {n} vertices reachable")]
    Disconnected { reached: usize, n: usize },

    #[error("weight is not positive at position {index} (value {value})")]
    NonPositiveWeight { index: usize, value: f64 },

    #[error("weight norm {norm} differs from 1 (set normalize to rescale)")]
    WeightNorm { norm: f64 },

    #[error("lambda must be nonnegative, got {0}")]
    NegativeLambda(f64),

    #[error("network has no vertices")]
    EmptyNetwork,

    #[error("operator is not elliptic: {0}")]
    Spectral(String),

    #[error("matrix is not symmetric (max deviation {deviation:e})")]
    NotSymmetric { deviation: f64 },

    #[error("singular perturbation: beta = {beta:e}")]
    SingularPerturbation { beta: f64 },

    #[error("ill-conditioned system: condition number {condition:e}")]
    IllConditioned { condition: f64 },

    #[error("block D is singular or ill-conditioned")]
    SingularBlock,

    #[error("attachment has no anchors")]
    EmptyAttachment,

    #[error("duplicate anchor `{0}`")]
    DuplicateAnchor(String),

    #[error("new vertex label `{0}` already exists")]
    ExistingVertex(String),

    #[error("nonpositive weight {0} for the new vertex")]
    NonPositiveNewWeight(f64),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Parse(err.to_string())
    }
}
