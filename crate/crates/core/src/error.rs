use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    #[error("parameter {0} lies outside the declared parameter domain")]
    ParameterOutsideDomain(String),

    #[error("root finder did not converge after {iters} iterations (worst residual {residual:.3e})")]
    RootFinding { iters: usize, residual: f64 },

    #[error("orbit escaped the polydisc at step {step}")]
    OrbitEscaped { step: usize },

    #[error("node budget exceeded: {needed} atoms > budget {budget}; use the walk estimator")]
    BudgetExceeded { needed: u128, budget: u64 },

    #[error("base point {0} is within the exceptional guard radius of the postcritical set")]
    ExceptionalBase(String),

    #[error("observable is -inf on {bad_weight:.3e} of total weight (limit 1e-3); not integrable at this resolution")]
    NotIntegrable { bad_weight: f64 },

    #[error("{failed} of {total} inverse walkers failed (limit 1%)")]
    WalkerFailures { failed: usize, total: usize },

    #[error("{discarded} of {total} orbit starts discarded (limit 20%); start cloud is not equilibrium-like")]
    OrbitDiscards { discarded: usize, total: usize },

    #[error("supremum lattice is empty after the non-escape filter")]
    EmptyLattice,

    #[error("{failed} of {total} grid nodes failed (limit 5%)")]
    GridFailures { failed: usize, total: usize },

    #[error("operation requires {required}, but the family has {actual}")]
    UnsupportedFamily { required: String, actual: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("family file parse error: {0}")]
    FamilyParse(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
