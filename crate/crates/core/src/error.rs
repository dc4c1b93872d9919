use thiserror::Error;

/// Which feasibility rule an association or power allocation broke.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Violation {
    /// A UAV's allocated power exceeds its peak budget.
    PowerBudget { uav: usize },
    /// A user holds more than one (UAV, RB) pair.
    UserOverAssigned { user: usize },
    /// A resource block is used by more than one (UAV, user) pair.
    RbReused { rb: usize },
    /// A UAV is not attached to exactly one tethered balloon.
    BackhaulNotUnique { uav: usize },
    /// Power allocated on a link that is not associated.
    PowerOnIdleLink { uav: usize, user: usize, rb: usize },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::PowerBudget { uav } => write!(f, "peak power exceeded at UAV {uav}"),
            Violation::UserOverAssigned { user } => {
                write!(f, "user {user} associated with more than one UAV/RB pair")
            }
            Violation::RbReused { rb } => write!(f, "resource block {rb} assigned more than once"),
            Violation::BackhaulNotUnique { uav } => {
                write!(f, "UAV {uav} not attached to exactly one balloon")
            }
            Violation::PowerOnIdleLink { uav, user, rb } => {
                write!(f, "power on unassociated link (uav {uav}, user {user}, rb {rb})")
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("constraint violated: {0}")]
    Constraint(Violation),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("simplex iteration limit reached")]
    IterationLimit,
    #[error("instance too large for exhaustive search: {0}")]
    TooLarge(String),
    #[error("strategy {strategy}: {source}")]
    Strategy {
        strategy: String,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
