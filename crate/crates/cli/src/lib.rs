//! File formats, experiment configuration, report rendering and the staged
//! experiment runner behind the `gameofn` binary.

pub mod artifacts;
pub mod checkpoint;
pub mod config;
pub mod hashing;
pub mod report;
pub mod runner;
