//! Exact first derivatives of the shooting transcription.
//!
//! Each Taylor step is evaluated once on dual numbers seeded with the state
//! and the step's three decision variables, which yields the step Jacobians
//! `A_k = ds(k+1)/ds(k)` and `B_k = ds(k+1)/d(u_R, u_L, T_s)(k)`. The state
//! sensitivity `S_k = ds(k)/dz` then follows `S_{k+1} = A_k S_k + B_k`, and
//! every cost and constraint gradient is a chain through `S_k`.

use crate::discretization::{propagate, taylor_step, Control, Trajectory};
use crate::dual::{seed, Dual};
use crate::error::Result;
use crate::linalg::Mat;
use crate::robot::{torque_from_accel, RobotParams, State};
use crate::scalar::Scalar;
use crate::solver::sqp::{Nlp, NlpEval};

use super::constraints::{terminal_rows, ConstraintConfig, Pose, TERMINAL_ROWS};
use super::{accumulate_cost, eval_constraints, lagrangian, unpack, NlpProblem, Weights};

/// Step duals: 7 state directions followed by `u_R, u_L, T_s`.
type D<T> = Dual<T, 10>;

#[derive(Clone, Debug)]
pub struct Evaluation<T> {
    pub objective: T,
    pub gradient: Vec<T>,
    /// Full constraint vector, see [`super::ConstraintLayout`].
    pub constraints: Vec<T>,
    /// `dg/dz`, one row per entry of `constraints`.
    pub jacobian: Mat<T>,
    pub trajectory: Trajectory<T>,
}

fn lift_params<T: Scalar, const K: usize>(p: &RobotParams<T>) -> RobotParams<Dual<T, K>> {
    let c = Dual::constant;
    let m = |a: &[[T; 2]; 2]| [[c(a[0][0]), c(a[0][1])], [c(a[1][0]), c(a[1][1])]];
    RobotParams { r: c(p.r), b: c(p.b), m: m(&p.m), v: m(&p.v) }
}

fn lift_weights<T: Scalar>(w: &Weights<T>) -> Weights<D<T>> {
    let c = Dual::constant;
    Weights { r: w.r.map(c), p: w.p.map(c), beta: c(w.beta), ke_form: w.ke_form }
}

fn lift_config<T: Scalar>(cfg: &ConstraintConfig<T>) -> ConstraintConfig<Dual<T, 7>> {
    let c = Dual::constant;
    let pair = |b: Option<[T; 2]>| b.map(|v| v.map(c));
    ConstraintConfig {
        t_min: c(cfg.t_min),
        t_max: c(cfg.t_max),
        tau_min: c(cfg.tau_min),
        tau_max: c(cfg.tau_max),
        eps: c(cfg.eps),
        eps_phi: c(cfg.eps_phi),
        eps_v: c(cfg.eps_v),
        target: Pose { x: c(cfg.target.x), y: c(cfg.target.y), phi: c(cfg.target.phi) },
        wrap_angle: cfg.wrap_angle,
        accel_bounds: pair(cfg.accel_bounds),
        wheel_speed_bounds: pair(cfg.wheel_speed_bounds),
    }
}

/// `d/dz` of a quantity with local derivative `local` w.r.t. `(s(k), z_k)`,
/// written into `out` (length `3N`). `sens[j]` is column `j` of `S_k`.
fn chain_into<T: Scalar>(local: &[T; 10], sens: &[[T; 7]], k: usize, out: &mut [T]) {
    for (j, col) in sens[..3 * k].iter().enumerate() {
        let mut acc = T::zero();
        for i in 0..7 {
            acc = acc + local[i] * col[i];
        }
        out[j] = out[j] + acc;
    }
    for i in 0..3 {
        out[3 * k + i] = out[3 * k + i] + local[7 + i];
    }
}

/// Objective, full constraint vector and their exact gradients at `z`.
pub fn objective_and_gradient<T: Scalar>(z: &[T], prob: &NlpProblem<T>) -> Result<Evaluation<T>> {
    let n = prob.steps;
    let controls = unpack(z, n)?;
    let traj = propagate(&prob.x0, &controls, &prob.params, &prob.disc)?;
    let objective = accumulate_cost(&traj, &prob.weights, &prob.params);
    let constraints = eval_constraints(&traj, &prob.constraints, &prob.params);

    let layout = prob.layout();
    let cfg = &prob.constraints;
    let nv = 3 * n;
    let mut gradient = vec![T::zero(); nv];
    let mut jac = Mat::zeros(layout.len(), nv);

    let pd = lift_params::<T, 10>(&prob.params);
    let wd = lift_weights(&prob.weights);
    let mut sens = vec![[T::zero(); 7]; nv];

    for k in 0..n {
        let s = traj.states[k].to_array();
        let c = controls[k];
        let vars = seed([s[0], s[1], s[2], s[3], s[4], s[5], s[6], c.u_r, c.u_l, c.t_s]);
        let mut sa = [Dual::constant(T::zero()); 7];
        sa.copy_from_slice(&vars[..7]);
        let sd = State::from_array(sa);
        let cd = Control::new(vars[7], vars[8], vars[9]);

        let cost = cd.t_s * lagrangian(&sd, &cd.accel(), &wd, &pd);
        chain_into(&cost.eps, &sens, k, &mut gradient);

        let tau = torque_from_accel(&cd.accel(), &sd.wheel_velocity(), &pd);
        for (w, t) in [tau.tau_r, tau.tau_l].into_iter().enumerate() {
            let up = layout.torque_upper(k, w);
            chain_into(&t.eps, &sens, k, jac.row_mut(up));
            let lo = layout.torque_lower(k, w);
            let row: Vec<T> = jac.row(up).to_vec();
            for (dst, src) in jac.row_mut(lo).iter_mut().zip(row) {
                *dst = -src;
            }
        }

        jac[(layout.period_upper(k), 3 * k + 2)] = T::one();
        jac[(layout.period_lower(k), 3 * k + 2)] = -T::one();
        if let Some(a) = layout.accel_start() {
            let r = a + 4 * k;
            jac[(r, 3 * k)] = T::one();
            jac[(r + 1, 3 * k + 1)] = T::one();
            jac[(r + 2, 3 * k)] = -T::one();
            jac[(r + 3, 3 * k + 1)] = -T::one();
        }

        // S_{k+1} = A_k S_k + B_k
        let next = taylor_step(&sd, &cd, &pd, &prob.disc).to_array();
        for col in sens[..3 * k].iter_mut() {
            let old = *col;
            for i in 0..7 {
                let mut acc = T::zero();
                for l in 0..7 {
                    acc = acc + next[i].eps[l] * old[l];
                }
                col[i] = acc;
            }
        }
        for v in 0..3 {
            for i in 0..7 {
                sens[3 * k + v][i] = next[i].eps[7 + v];
            }
        }

        if let Some(start) = layout.speed_start() {
            // rows for state k+1: v_R - max, v_L - max, min - v_R, min - v_L
            let r = start + 4 * k;
            for j in 0..3 * (k + 1) {
                jac[(r, j)] = sens[j][5];
                jac[(r + 1, j)] = sens[j][6];
                jac[(r + 2, j)] = -sens[j][5];
                jac[(r + 3, j)] = -sens[j][6];
            }
        }
    }

    let sn = traj.terminal().to_array();
    let sn = State::from_array(seed(sn));
    let term = terminal_rows(&sn, &lift_config(cfg), &lift_params::<T, 7>(&prob.params));
    let t0 = layout.terminal(super::constraints::TerminalRow::XUpper);
    for (i, row) in term.iter().enumerate().take(TERMINAL_ROWS) {
        let out = jac.row_mut(t0 + i);
        for (j, col) in sens.iter().enumerate() {
            let mut acc = T::zero();
            for l in 0..7 {
                acc = acc + row.eps[l] * col[l];
            }
            out[j] = acc;
        }
    }

    Ok(Evaluation { objective, gradient, constraints, jacobian: jac, trajectory: traj })
}

impl<T: Scalar> Nlp<T> for NlpProblem<T> {
    fn num_vars(&self) -> usize {
        3 * self.steps
    }

    /// Period bounds are passed as simple bounds, the rest as general rows.
    fn num_constraints(&self) -> usize {
        let l = self.layout();
        l.len() - l.general_start()
    }

    fn bounds(&self) -> (Vec<T>, Vec<T>) {
        let inf = T::infinity();
        let lo = (0..self.steps).flat_map(|_| [-inf, -inf, self.constraints.t_min]).collect();
        let hi = (0..self.steps).flat_map(|_| [inf, inf, self.constraints.t_max]).collect();
        (lo, hi)
    }

    fn values(&self, x: &[T]) -> Result<(T, Vec<T>)> {
        let controls = unpack(x, self.steps)?;
        let traj = propagate(&self.x0, &controls, &self.params, &self.disc)?;
        let f = accumulate_cost(&traj, &self.weights, &self.params);
        let mut g = eval_constraints(&traj, &self.constraints, &self.params);
        g.drain(..self.layout().general_start());
        Ok((f, g))
    }

    fn derivatives(&self, x: &[T]) -> Result<NlpEval<T>> {
        let e = objective_and_gradient(x, self)?;
        let start = self.layout().general_start();
        let m = e.constraints.len() - start;
        let mut jacobian = Mat::zeros(m, x.len());
        for i in 0..m {
            jacobian.row_mut(i).copy_from_slice(e.jacobian.row(start + i));
        }
        let mut constraints = e.constraints;
        constraints.drain(..start);
        Ok(NlpEval { objective: e.objective, gradient: e.gradient, constraints, jacobian })
    }
}
