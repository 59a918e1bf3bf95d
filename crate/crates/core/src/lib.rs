//! Game-of-N environment and GFlowNet machinery.
//!
//! Everything here is pure computation over `alloc`; file formats, the CLI
//! and experiment orchestration live in the `gameofn` crate.

#![no_std]

extern crate alloc;

pub mod check;
pub mod dataset;
pub mod decoding;
pub mod error;
pub mod eval;
pub mod flow;
pub mod game;
pub mod oracle;
pub mod policy;
pub mod rational;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};
pub use game::{ArithStep, GameState, Op, Puzzle, Trajectory};
pub use rational::Rational;
