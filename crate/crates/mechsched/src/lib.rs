//! Prediction-augmented strategyproof scheduling on unrelated machines.
//!
//! The library implements a family of scaled-greedy allocation mechanisms
//! that bias a per-job greedy rule toward a schedule precomputed on a
//! predicted processing-time matrix, together with:
//!
//! - exact and greedy makespan solvers ([`makespan`]),
//! - critical-value payments that make every scaled-min allocation
//!   strategyproof ([`payments`]),
//! - executable verifiers for monotonicity, strategyproofness, and the
//!   consistency/robustness/error bounds ([`verify`]),
//! - instance generators including the extremal families used by the
//!   verification suite ([`instances`]).
//!
//! Processing times are extended reals: finite nonnegative `f64` or
//! `f64::INFINITY`. All indices are zero-based.

pub mod core;
pub mod instances;
pub mod makespan;
pub mod mechanisms;
pub mod payments;
pub mod verify;

pub use crate::core::{Allocation, Instance, Prediction, Ratio, ScalarMatrix};
pub use crate::mechanisms::{MechanismKind, MechanismOutcome, Params, ScalarPlan, TiePolicy};

/// Errors produced across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },
    #[error("invalid entry at ({i},{j}): {reason}")]
    InvalidEntry { i: usize, j: usize, reason: String },
    #[error("job {job} has no machine with finite processing time")]
    InfeasibleJob { job: usize },
    #[error("machine index {machine} out of range for {n} machines")]
    MachineOutOfRange { machine: usize, n: usize },
    #[error("instance beyond exact-search cap ({detail})")]
    SearchCap { detail: String },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("job {job} has no competing machine with finite scaled time (monopolist)")]
    MonopolistJob { job: usize },
    #[error("missing parameter: {0}")]
    MissingParam(&'static str),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
