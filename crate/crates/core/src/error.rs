use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("error probability {0} outside [0, 1/2]")]
    ProbabilityOutOfRange(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("field shapes do not match: {0}")]
    ShapeMismatch(String),

    #[error("infinite coupling (p = 0) not supported by {0}; use the noiseless solver")]
    InfiniteCoupling(&'static str),

    #[error("budget exceeded: {what} needs {needed}, limit {limit}")]
    BudgetExceeded {
        what: &'static str,
        needed: usize,
        limit: usize,
    },

    #[error("noiseless observations are inconsistent at edge {edge}")]
    InconsistentObservations { edge: usize },

    #[error("sandwich domination violated at sweep {sweep}, site {site}")]
    DominationViolated { sweep: usize, site: usize },

    #[error("specification is not monotone: {0}")]
    NotMonotone(String),

    #[error("Dobrushin condition fails (sup row sum {0})")]
    DobrushinConditionFails(f64),

    #[error("series diverges: ratio {ratio} >= 1 in {series}")]
    DivergentSeries { series: &'static str, ratio: f64 },

    #[error("certificate refused: {0}")]
    CertificateRefused(String),

    #[error("operator T_i is not invertible at p = 1/2")]
    NotInvertible,
}

pub type Result<T> = std::result::Result<T, Error>;
