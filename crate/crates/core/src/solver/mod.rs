pub mod guess;
pub mod qp;
mod report;
pub mod sqp;

pub use guess::{make_initial_guess, GuessPlan, DEFAULT_V_REF};
pub use report::{solve, SolveReport};
pub use sqp::{minimize, GradientCheck, IterationRecord, Nlp, NlpEval, SolveStatus, SolverOptions, SqpResult};
