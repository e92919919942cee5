use thiserror::Error;

pub type Result<T, E = FcmsError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FcmsError {
    #[error("invalid parameter `{name}` = {value}: must satisfy {bound}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        bound: &'static str,
    },

    /// A non-finite value was observed in the named field (`S`, `d`, `x[17]`, ...).
    #[error("divergence: non-finite value in {field}")]
    Divergence { field: String },

    #[error("heterogeneous damping {0:?} has no reduced (S, d) form; use the full Jacobian")]
    HeterogeneousDamping(Vec<f64>),

    #[error("population needs at least 2 agents, got {0}")]
    PopulationTooSmall(usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("eigenvalue iteration did not converge for matrix {matrix:?}")]
    NoConvergence { matrix: [[f64; 3]; 3] },

    #[error("spectral radius {rho} >= 1: {context}")]
    NotStable { rho: f64, context: &'static str },

    #[error("{what} did not converge within {iterations} iterations")]
    IterationBudget {
        what: &'static str,
        iterations: usize,
    },

    #[error("need more than {needed} samples, got {got}")]
    InsufficientSamples { got: usize, needed: usize },

    #[error("lag-1 autocorrelation undefined for a constant series")]
    ConstantSeries,

    #[error("no recovery within {0} steps")]
    NoRecovery(u64),

    #[error("coupling grid contains values at or above beta_c = {beta_c}: {offenders:?}")]
    SupercriticalGrid { beta_c: f64, offenders: Vec<f64> },

    #[error("precondition violated: {0}")]
    Precondition(String),
}
