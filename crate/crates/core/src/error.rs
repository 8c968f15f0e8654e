use thiserror::Error;

use crate::model::Violation;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid layout: {field}: {reason}")]
    InvalidLayout { field: &'static str, reason: String },

    #[error("invalid config: {}", format_violations(.0))]
    InvalidConfig(Vec<Violation>),

    #[error("requested {requested} links but only {available} distinct pairs exist")]
    TooManyLinks { requested: usize, available: usize },

    #[error("qubit index {index} out of range for {n} qubits")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("two-qubit gate needs distinct qubits, got {0} twice")]
    SameQubit(usize),

    #[error("gate is not unitary (deviation {deviation:e})")]
    NonUnitaryGate { deviation: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("wrong density-matrix dimension: expected {expected}, got {got}")]
    WrongDimension { expected: usize, got: usize },

    #[error("{n} qubits exceeds the memory limit of {limit} qubits")]
    TooLarge { n: usize, limit: usize },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("degenerate fit: {points} points, need at least 3")]
    DegenerateFit { points: usize },

    #[error("invalid run: {0}")]
    InvalidRun(String),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
