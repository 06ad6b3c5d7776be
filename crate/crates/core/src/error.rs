use thiserror::Error;

use crate::bitset::ActiveSetTuple;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("Riccati recursion did not converge within {0} iterations")]
    NoConvergence(usize),

    #[error("R + B'PB is numerically singular")]
    SingularInnerMatrix,

    #[error("terminal set not finitely determined within {0} iterations")]
    NotFinitelyDetermined(usize),

    #[error("polytope is empty")]
    EmptyPolytope,

    #[error("polytope is unbounded")]
    Unbounded,

    #[error("vertex enumeration requires a 2-D polytope, got dimension {0}")]
    DimensionNot2D(usize),

    #[error("constraint index {index} outside 1..={q}")]
    IndexOutOfRange { index: usize, q: usize },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("cannot drop {drop} stages from a horizon-{horizon} tuple")]
    BadStageCount { drop: usize, horizon: usize },

    #[error("tuple {0} has an active terminal constraint")]
    NotPersistentForm(ActiveSetTuple),

    #[error("malformed tuple text {0:?}")]
    BadTupleText(String),

    #[error("bordered KKT system is singular for {0}")]
    DegenerateKkt(ActiveSetTuple),

    #[error("horizon mismatch: expected {expected}, got {got}")]
    HorizonMismatch { expected: usize, got: usize },

    #[error("atlases were generated from different problems")]
    FingerprintMismatch,

    #[error("structure violation at {tuple}: {reason}")]
    StructureViolation { tuple: String, reason: String },

    #[error("state {0:?} lies outside the feasible set")]
    OutsideDomain(Vec<f64>),

    #[error("state leaves the feasible set at step {step}")]
    OutsideDomainAt { step: usize },

    #[error("point is infeasible for the condensed QP")]
    InfeasiblePoint,

    #[error("exhaustive enumeration over {0} constraints is too large")]
    TooLarge(usize),

    #[error("rejection sampling exhausted after {0} draws")]
    SamplingExhausted(usize),

    #[error("QP oracle failed: {0}")]
    OracleFailure(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
