use alloc::string::String;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("state is terminal; no actions remain")]
    TerminalState,
    #[error("action {0} is not legal in this state")]
    IllegalAction(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("rational arithmetic overflowed")]
    Overflow,
    #[error("invalid puzzle: {0}")]
    InvalidPuzzle(String),
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),
    #[error("temperature must be positive, got {0}")]
    InvalidTemperature(FloatBits),
    #[error("invalid decoding parameter: {0}")]
    InvalidDecodeConfig(String),
    #[error("not enough puzzles to fill split {split}: need {needed}, have {available}")]
    InsufficientPuzzles {
        split: String,
        needed: usize,
        available: usize,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("model was trained on target {found}, expected {expected}")]
    ChecksumMismatch { expected: i64, found: i64 },
}

/// `f64` wrapper that is `Eq` by bit pattern so [`Error`] can stay comparable.
#[derive(Debug, Clone, Copy)]
pub struct FloatBits(pub f64);

impl PartialEq for FloatBits {
    fn eq(&self, other: &Self) -> bool {
        self.0.to_bits() == other.0.to_bits()
    }
}

impl Eq for FloatBits {}

impl core::fmt::Display for FloatBits {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
