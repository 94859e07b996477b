//! Error type shared by every module of the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("empty domain: right endpoint {b} must exceed left endpoint {a}")]
    EmptyDomain { a: f64, b: f64 },

    #[error("grid needs at least one interior node")]
    ZeroSize,

    #[error("field has {got} values but the grid has {expected} interior nodes")]
    GridMismatch { expected: usize, got: usize },

    #[error("tridiagonal solve hit a vanishing pivot at row {row}")]
    SingularSolve { row: usize },

    #[error("non-finite value during {context} at step {step}")]
    BlowUp { step: usize, context: &'static str },

    #[error("smoothing window {window} exceeds trajectory length {len}")]
    WindowTooLarge { window: usize, len: usize },

    #[error("smoothing window must be odd, got {window}")]
    EvenWindow { window: usize },

    #[error("time grids differ: expected {expected} samples, got {got}")]
    TimeGridMismatch { expected: usize, got: usize },

    #[error("energy must stay positive for a log-linear fit; E[{index}] = {value}")]
    NonPositiveEnergy { index: usize, value: f64 },

    #[error("invalid parameter {name}: {message}")]
    InvalidParam { name: &'static str, message: String },
}
