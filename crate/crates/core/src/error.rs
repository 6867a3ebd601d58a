use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("particle cloud must hold at least one particle")]
    EmptyCloud,
    #[error("cloud has {particles} particles but {weights} weights")]
    LengthMismatch { particles: usize, weights: usize },
    #[error("particle storage of length {len} is not a multiple of dimension {dim}")]
    DimensionMismatch { len: usize, dim: usize },
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("every particle assigns zero likelihood to the datum")]
    AllZeroLikelihood,
    #[error("covariance matrix could not be factorized even after jitter")]
    DegenerateCovariance,
    #[error("need {needed} distinct points for clustering, found {found}")]
    TooFewDistinctPoints { needed: usize, found: usize },
    #[error("weighted k-means did not converge within {0} iterations")]
    MaxItersExceeded(usize),
    #[error("context field `{0}` is unset on the whole root-to-node path")]
    UnsetContextField(&'static str),
    #[error("datum rejected: every branch of the tree assigns it zero likelihood")]
    EmptyTree,
    #[error("no two distinct particles could be drawn from the cloud")]
    DegenerateCloud,
    #[error("state populations must sum to 1, got {0}")]
    AmplitudesNotNormalized(f64),
    #[error("no node at path {0:?}")]
    NoSuchNode(Vec<usize>),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
