use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is singular (pivot {pivot} vanished)")]
    Singular { pivot: usize },

    #[error("duplicate interpolation abscissa {0}")]
    DuplicateAbscissa(f64),

    #[error("empty interval [{lo}, {hi}]")]
    EmptyInterval { lo: f64, hi: f64 },

    #[error("lift-one path through coordinate {index} is undefined when its weight is 1")]
    DegeneratePath { index: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid allocation: {0}")]
    InvalidAllocation(String),

    /// The constraint polytope is empty. `residual` is the minimal total
    /// constraint violation found by phase one of the simplex method.
    #[error("constraints are infeasible (minimal total violation {residual:.3e})")]
    Infeasible { residual: f64 },

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("rounding stuck at {assigned} of {target}: no index may grow")]
    Stuck { assigned: u64, target: u64 },

    #[error("floor allocation {0:?} admits no feasible completion")]
    FloorInfeasible(Vec<u64>),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    /// Errors caused by the caller's input rather than by numerical failure.
    pub fn is_user_error(&self) -> bool {
        matches!(
            self,
            Error::Dimension(_)
                | Error::InvalidParameter(_)
                | Error::InvalidAllocation(_)
                | Error::Infeasible { .. }
                | Error::FloorInfeasible(_)
                | Error::Stuck { .. }
                | Error::Unsupported(_)
                | Error::Config(_)
                | Error::EmptyInterval { .. }
                | Error::DuplicateAbscissa(_)
        )
    }
}
