//! PPHPC predator-prey agent-based model and a replication-validation
//! toolkit around it.
//!
//! The crate is split along the lines of the validation workflow:
//!
//! - [`sim`] runs the model deterministically from `(params, seed)`.
//! - [`io`] reads and writes the file formats exchanged between tools.
//! - [`stats`] compares two groups of runs (standardize, PCA, Energy
//!   permutation test, Benjamini-Hochberg) and yields a 5/6 verdict.
//! - [`bench`] times replications and summarizes them.
//! - [`harness`] drives external candidate simulators through the staged
//!   1-6 scoring pipeline.

pub mod bench;
pub mod harness;
pub mod io;
pub mod params;
pub mod rng;
pub mod sim;
pub mod stats;

pub use params::{ParamError, SimParams};
pub use sim::{run_simulation, AgentKind, OutputRow, SimOutput, World};
