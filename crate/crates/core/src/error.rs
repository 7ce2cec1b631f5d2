use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid potential: {0}")]
    InvalidPotential(String),
    #[error("branch cut hit: p^2 - z = {0} is a nonpositive real")]
    BranchCut(f64),
    #[error("singular interaction matrix at p = {p}, z = {z}")]
    SingularMatrix { p: f64, z: String },
    #[error("energy {0} lies outside the continuation region")]
    OutsideStrip(String),
    #[error("threshold singularity in channel {0}")]
    Threshold(usize),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("search window {lo}..{hi} is invalid: {reason}")]
    Window { lo: f64, hi: f64, reason: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
