//! Scenario runner for the trajectory planner: scenario and sweep files,
//! CSV tables, SVG plots and self-checks behind the `ddtraj` binary.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod check;
pub mod cli;
pub mod config;
pub mod error;
pub mod runner;
pub mod scenario;
pub mod svg;

pub use error::{Error, Result};
pub use scenario::{Profile, Scenario, SweepSpec};
