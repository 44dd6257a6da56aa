use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("budget violation: {0}")]
    Budget(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl HarnessError {
    /// Process exit status.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Budget(_) => 3,
            HarnessError::Invariant(_) => 4,
            HarnessError::Io(_) | HarnessError::Csv(_) => 1,
        }
    }
}

impl From<condphase::Error> for HarnessError {
    fn from(e: condphase::Error) -> Self {
        use condphase::Error as E;
        match e {
            E::BudgetExceeded { .. } => HarnessError::Budget(e.to_string()),
            E::ProbabilityOutOfRange(_) | E::InvalidArgument(_) | E::ShapeMismatch(_) | E::InfiniteCoupling(_) => {
                HarnessError::Config(e.to_string())
            }
            _ => HarnessError::Invariant(e.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
