use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("topology is invalid: {0}")]
    InvalidTopology(crate::topology::ValidationReport),

    #[error("network is not open: no exit reachable from operators {trapped:?}; traffic equations diverge")]
    NonOpenNetwork { trapped: Vec<usize> },

    #[error("traffic solvers disagree beyond tolerance (max relative gap {max_rel_gap:e})")]
    SolverDisagreement { max_rel_gap: f64 },

    #[error("target {t_max_secs} s is unreachable: expected sojourn is bounded below by {lower_bound_secs} s")]
    UnreachableTarget {
        t_max_secs: f64,
        lower_bound_secs: f64,
    },

    #[error("enumeration of {count} allocations exceeds the limit of {limit}")]
    EnumerationTooLarge { count: u128, limit: u128 },

    #[error("operator {operator} appears stalled: arrivals observed but no service-rate measurement")]
    StalledOperator { operator: usize },

    #[error("metric data integrity violation: {0}")]
    DataIntegrity(String),

    #[error("simulation aborted: queue at operator {operator} exceeded {cap} entries at t={at:.3}s")]
    InstabilityDetected { operator: usize, cap: u64, at: f64 },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
