//! Time-energy optimal trajectories for a differential-drive robot.
//!
//! The control problem is transcribed by direct single shooting with one
//! free sampling period per step, discretized with a truncated Taylor (Lie
//! series) step, and solved by a dense SQP method with exact forward
//! sensitivities. Everything is generic over the scalar type; the aliases
//! below fix it to `f64`.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Dense linear algebra reads best with explicit indices.
#![allow(clippy::needless_range_loop)]

pub mod discretization;
pub mod dual;
pub mod error;
pub mod linalg;
pub mod problem;
pub mod robot;
pub mod scalar;
pub mod solver;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type RobotParams = robot::RobotParams<f64>;
pub type State = robot::State<f64>;
pub type Control = discretization::Control<f64>;
pub type Trajectory = discretization::Trajectory<f64>;
pub type Weights = problem::Weights<f64>;
pub type ConstraintConfig = problem::ConstraintConfig<f64>;
pub type Pose = problem::Pose<f64>;
pub type NlpProblem = problem::NlpProblem<f64>;
pub type SolveReport = solver::SolveReport<f64>;
pub type GuessPlan = solver::GuessPlan<f64>;
pub type Metrics = problem::Metrics<f64>;
pub type MetricGains = problem::MetricGains<f64>;
