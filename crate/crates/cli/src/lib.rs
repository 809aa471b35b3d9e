//! Scenario runner for `resolvent-lab`: JSON scenario files, task dispatch
//! and artifact output. The binary in `main.rs` is a thin clap wrapper.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bundled;
pub mod failure;
pub mod runner;
pub mod scenario;
pub mod tasks;

pub use failure::Failure;
pub use runner::{run, RunOptions, RunReport};
pub use scenario::Scenario;
