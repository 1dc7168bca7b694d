//! Multi-party simulation, scenario runner, randomized scenario generator
//! and benchmark suite for `rbks-core`.

pub mod bench;
pub mod cli;
pub mod error;
pub mod random;
pub mod scenario;
pub mod sim;
pub mod stats;

pub use error::{HarnessError, Result};
