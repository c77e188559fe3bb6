//! Solving an [`NlpProblem`] end to end.
//!
//! The SQP iterates in velocity-increment coordinates `w(k) = u(k) T_s(k)`
//! instead of `u(k)`. In the original coordinates the wheel velocities after
//! `k` steps are the bilinear sums `sum u(j) T_s(j)`, and that coupling ruins
//! the quadratic model far from the solution; in the new coordinates they are
//! linear, and with constant `V` so are the torque bounds. The map is a
//! diffeomorphism on `T_s > 0`, which the simple bounds guarantee, so KKT
//! points correspond one to one and the reported solution is mapped back.

use std::time::{Duration, Instant};

use crate::discretization::{propagate, Control, Trajectory};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::problem::{accumulate_cost, eval_constraints, metrics, pack, MetricGains, Metrics, NlpProblem};
use crate::scalar::Scalar;
use crate::solver::sqp::{minimize, GradientCheck, IterationRecord, Nlp, NlpEval, SolveStatus, SolverOptions};

#[derive(Clone, Debug)]
pub struct SolveReport<T> {
    pub status: SolveStatus,
    pub controls: Vec<Control<T>>,
    pub trajectory: Trajectory<T>,
    pub objective: T,
    /// Relative first-order residual at the returned point, see
    /// [`minimize`].
    pub kkt_residual: f64,
    /// `max(0, max_i g_i)` over the full constraint vector, period bounds
    /// included.
    pub max_constraint_violation: f64,
    pub iterations: usize,
    pub metrics: Option<Metrics<T>>,
    /// Not part of the deterministic output.
    pub wall_time: Duration,
    pub log: Vec<IterationRecord>,
    pub gradient_check: Option<GradientCheck>,
}

impl<T: Scalar> SolveReport<T> {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }

    /// Fills in total energy and final time with the given gains.
    pub fn with_metrics(mut self, gains: &MetricGains<T>, prob: &NlpProblem<T>) -> Self {
        self.metrics = Some(metrics(&self.trajectory, gains, &prob.params));
        self
    }
}

/// [`NlpProblem`] seen through `x = [w_R, w_L, T_s]` per step.
struct Increments<'a, T>(&'a NlpProblem<T>);

fn to_accel<T: Scalar>(x: &[T]) -> Vec<T> {
    x.chunks_exact(3).flat_map(|c| [c[0] / c[2], c[1] / c[2], c[2]]).collect()
}

fn to_increments<T: Scalar>(z: &[T]) -> Vec<T> {
    z.chunks_exact(3).flat_map(|c| [c[0] * c[2], c[1] * c[2], c[2]]).collect()
}

/// Pulls a row gradient w.r.t. `z` back to `x`, with `z` the point it was
/// taken at: `du/dw = 1/T`, `du/dT = -u/T`.
fn pull_back<T: Scalar>(row: &mut [T], z: &[T]) {
    for (r, c) in row.chunks_exact_mut(3).zip(z.chunks_exact(3)) {
        let t = c[2];
        r[2] = r[2] - (r[0] * c[0] + r[1] * c[1]) / t;
        r[0] = r[0] / t;
        r[1] = r[1] / t;
    }
}

impl<T: Scalar> Nlp<T> for Increments<'_, T> {
    fn num_vars(&self) -> usize {
        self.0.num_vars()
    }

    fn num_constraints(&self) -> usize {
        self.0.num_constraints()
    }

    fn bounds(&self) -> (Vec<T>, Vec<T>) {
        self.0.bounds()
    }

    fn values(&self, x: &[T]) -> Result<(T, Vec<T>)> {
        self.0.values(&to_accel(x))
    }

    fn derivatives(&self, x: &[T]) -> Result<NlpEval<T>> {
        let z = to_accel(x);
        let mut e = self.0.derivatives(&z)?;
        pull_back(&mut e.gradient, &z);
        let mut jacobian: Mat<T> = e.jacobian;
        for i in 0..jacobian.rows() {
            pull_back(jacobian.row_mut(i), &z);
        }
        Ok(NlpEval { jacobian, ..e })
    }
}

/// Runs the SQP solver on `prob` from the control sequence `guess`.
pub fn solve<T: Scalar>(prob: &NlpProblem<T>, guess: &[Control<T>], opts: &SolverOptions) -> Result<SolveReport<T>> {
    opts.validate()?;
    if guess.len() != prob.steps {
        return Err(Error::LengthMismatch { expected: prob.steps, got: guess.len() });
    }
    let cfg = &prob.constraints;
    if let Some(k) = guess.iter().position(|c| !(c.t_s >= cfg.t_min && c.t_s <= cfg.t_max)) {
        return Err(Error::InvalidInput(format!("guess period {k} lies outside [T_min, T_max]")));
    }
    if guess.iter().any(|c| !c.u_r.is_finite() || !c.u_l.is_finite()) {
        return Err(Error::InvalidInput("non-finite acceleration in guess".into()));
    }

    let start = Instant::now();
    let res = minimize(&Increments(prob), &to_increments(&pack(guess)), opts);
    let wall_time = start.elapsed();

    let controls: Vec<Control<T>> = to_accel(&res.x).chunks_exact(3).map(|c| Control::new(c[0], c[1], c[2])).collect();
    let trajectory = propagate(&prob.x0, &controls, &prob.params, &prob.disc)?;
    let g = eval_constraints(&trajectory, cfg, &prob.params);
    let viol = g.iter().fold(T::zero(), |m, &v| m.max(v)).to_f64_lossy();
    Ok(SolveReport {
        status: res.status,
        objective: accumulate_cost(&trajectory, &prob.weights, &prob.params),
        controls,
        trajectory,
        kkt_residual: res.kkt_residual,
        max_constraint_violation: viol,
        iterations: res.iterations,
        metrics: None,
        wall_time,
        log: res.log,
        gradient_check: res.gradient_check,
    })
}
