use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("covariance for subcarrier {subcarrier} is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { subcarrier: usize, min_eigenvalue: f64 },

    #[error("waterfilling needs at least one positive channel eigenvalue")]
    NoActiveStream,

    #[error("{taps} taps do not fit in a {subcarriers}-point DFT")]
    TooFewSubcarriers { taps: usize, subcarriers: usize },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("unknown scenario `{0}` (expected se_vs_snr, plos_vs_se, distance_vs_se or complexity_table)")]
    UnknownScenario(String),

    #[error("config {path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
