//! Feasible-ish starting point: turn towards the target, drive straight,
//! turn to the final heading.
//!
//! Each phase uses a trapezoidal velocity profile on the wheels.
//! Because the wheel-angle update of a Taylor step is exact for constant
//! acceleration, and pure rotation or pure translation keeps the other pose
//! components fixed, the guess reaches the target pose at rest up to rounding.

use crate::discretization::{propagate, Control};
use crate::error::{Error, Result};
use crate::problem::{eval_constraints, pack, NlpProblem};
use crate::scalar::{wrap_angle, Scalar};

/// Below this distance (m) the translation phase is dropped.
const MIN_DISTANCE: f64 = 1e-9;
/// Below this angle (rad) a rotation phase is dropped.
const MIN_ROTATION: f64 = 1e-9;
/// Fraction of the torque range kept free on each side.
const TORQUE_MARGIN: f64 = 0.05;
const PERIOD_GROWTH: f64 = 1.25;

/// Default reference speed for the time estimate (m/s).
pub const DEFAULT_V_REF: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq)]
enum Phase<T> {
    /// Signed heading change.
    Rotate(T),
    /// Forward distance.
    Translate(T),
}

#[derive(Clone, Debug, PartialEq)]
pub struct GuessPlan<T> {
    pub straight_line_distance: T,
    /// Turn before driving, wrapped into `(-pi, pi]`.
    pub initial_rotation: T,
    /// Turn after driving, wrapped into `(-pi, pi]`.
    pub final_rotation: T,
    /// `2 (d + b sum|dphi|) / v_ref` before clamping.
    pub time_estimate: T,
    /// Common sampling period actually used.
    pub period: T,
    pub controls: Vec<Control<T>>,
}

impl<T: Scalar> GuessPlan<T> {
    pub fn decision_vector(&self) -> Vec<T> {
        pack(&self.controls)
    }
}

/// Splits `n` steps over phases proportionally to `len`, at least two each.
/// Phases that do not fit are dropped, smallest first.
fn allocate<T: Scalar>(n: usize, phases: &mut Vec<(Phase<T>, T)>) -> Vec<usize> {
    while 2 * phases.len() > n {
        let (i, _) = phases
            .iter()
            .enumerate()
            .min_by(|a, b| a.1 .1.partial_cmp(&b.1 .1).unwrap_or(std::cmp::Ordering::Equal))
            .expect("nonempty");
        phases.remove(i);
    }
    if phases.is_empty() {
        return Vec::new();
    }
    let total = phases.iter().fold(T::zero(), |a, p| a + p.1);
    let spare = n - 2 * phases.len();
    let shares: Vec<f64> = phases.iter().map(|p| (p.1 / total).to_f64_lossy() * spare as f64).collect();
    let mut counts: Vec<usize> = shares.iter().map(|s| 2 + s.floor() as usize).collect();
    let mut left = n - counts.iter().sum::<usize>();
    // largest remainder, ties to the earlier phase
    let mut order: Vec<usize> = (0..phases.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = shares[a] - shares[a].floor();
        let rb = shares[b] - shares[b].floor();
        rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

/// Trapezoidal wheel-velocity profile for one phase of `steps >= 2` steps of
/// length `h`: accelerate for `m = max(1, steps / 4)` steps, cruise, then
/// decelerate for `m`. Covers wheel angles `(dr, dl)` exactly, since the
/// angle covered is `a m h^2 (steps - m)`.
fn phase_controls<T: Scalar>(dr: T, dl: T, steps: usize, h: T, out: &mut Vec<Control<T>>) {
    let m = (steps / 4).max(1);
    let denom = T::of((m * (steps - m)) as f64) * h * h;
    let (ar, al) = (dr / denom, dl / denom);
    out.extend((0..m).map(|_| Control::new(ar, al, h)));
    out.extend((0..steps - 2 * m).map(|_| Control::new(T::zero(), T::zero(), h)));
    out.extend((0..m).map(|_| Control::new(-ar, -al, h)));
}

fn build<T: Scalar>(prob: &NlpProblem<T>, phases: &[(Phase<T>, T)], counts: &[usize], h: T) -> Vec<Control<T>> {
    let p = &prob.params;
    let mut out = Vec::with_capacity(prob.steps);
    for (&(phase, _), &k) in phases.iter().zip(counts) {
        let (dr, dl) = match phase {
            Phase::Rotate(a) => (p.b * a / p.r, -p.b * a / p.r),
            Phase::Translate(d) => (d / p.r, d / p.r),
        };
        phase_controls(dr, dl, k, h, &mut out);
    }
    while out.len() < prob.steps {
        out.push(Control::new(T::zero(), T::zero(), h));
    }
    out
}

/// Checks torque rows against the bounds shrunk by the margin, and the
/// optional boxes against the plain bounds.
fn fits<T: Scalar>(prob: &NlpProblem<T>, controls: &[Control<T>]) -> bool {
    let Ok(traj) = propagate(&prob.x0, controls, &prob.params, &prob.disc) else {
        return false;
    };
    let g = eval_constraints(&traj, &prob.constraints, &prob.params);
    let layout = prob.layout();
    let cfg = &prob.constraints;
    let margin = T::of(TORQUE_MARGIN) * (cfg.tau_max - cfg.tau_min);
    let torque = g[2 * prob.steps..6 * prob.steps].iter().all(|&v| v <= -margin);
    let tail = layout.terminal(crate::problem::constraints::TerminalRow::OmegaLower) + 1;
    torque && g[tail..].iter().all(|&v| v <= T::zero())
}

/// Builds the three-phase initial guess for `prob` with reference speed
/// `v_ref` (m/s).
pub fn make_initial_guess<T: Scalar>(prob: &NlpProblem<T>, v_ref: T) -> Result<GuessPlan<T>> {
    if !(v_ref > T::zero()) || !v_ref.is_finite() {
        return Err(Error::InvalidParams(format!("reference speed must be > 0, got {v_ref}")));
    }
    let cfg = &prob.constraints;
    let (x0, target) = (&prob.x0, &cfg.target);
    let dx = target.x - x0.x;
    let dy = target.y - x0.y;
    let d = (dx * dx + dy * dy).sqrt();

    let mut phases = Vec::new();
    let (first, last) = if d > T::of(MIN_DISTANCE) {
        let bearing = dy.atan2(dx);
        (wrap_angle(bearing - x0.phi), wrap_angle(target.phi - bearing))
    } else {
        (wrap_angle(target.phi - x0.phi), T::zero())
    };
    let b = prob.params.b;
    if first.abs() > T::of(MIN_ROTATION) {
        phases.push((Phase::Rotate(first), b * first.abs()));
    }
    if d > T::of(MIN_DISTANCE) {
        phases.push((Phase::Translate(d), d));
    }
    if last.abs() > T::of(MIN_ROTATION) {
        phases.push((Phase::Rotate(last), b * last.abs()));
    }

    let two = T::of(2.0);
    let time_estimate = two * (d + b * (first.abs() + last.abs())) / v_ref;
    let n = T::of(prob.steps as f64);
    let mut h = (time_estimate / n).max(cfg.t_min).min(cfg.t_max);

    let counts = allocate(prob.steps, &mut phases);
    if phases.is_empty() {
        let controls = vec![Control::new(T::zero(), T::zero(), cfg.t_min); prob.steps];
        return Ok(GuessPlan {
            straight_line_distance: d,
            initial_rotation: first,
            final_rotation: last,
            time_estimate,
            period: cfg.t_min,
            controls,
        });
    }
    let mut controls = build(prob, &phases, &counts, h);
    while !fits(prob, &controls) && h < cfg.t_max {
        h = (h * T::of(PERIOD_GROWTH)).min(cfg.t_max);
        controls = build(prob, &phases, &counts, h);
    }
    Ok(GuessPlan {
        straight_line_distance: d,
        initial_rotation: first,
        final_rotation: last,
        time_estimate,
        period: h,
        controls,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::DiscretizationConfig;
    use crate::problem::{ConstraintConfig, KineticForm, Pose, Weights};
    use crate::robot::{RobotParams, State};
    use std::f64::consts::PI;

    fn problem(x0: State<f64>, target: Pose<f64>, steps: usize) -> NlpProblem<f64> {
        NlpProblem::new(
            x0,
            steps,
            RobotParams::default(),
            Weights::from_alpha(1.0, 1.0, KineticForm::Body).unwrap(),
            ConstraintConfig::desk(target),
            DiscretizationConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn reaches_target_at_rest() {
        let prob = problem(State::at_rest(7.0, 1.0, PI / 2.0), Pose { x: -7.0, y: -1.0, phi: -PI / 2.0 }, 40);
        let plan = make_initial_guess(&prob, DEFAULT_V_REF).unwrap();
        assert!((plan.straight_line_distance - 200f64.sqrt()).abs() < 1e-12);
        assert_eq!(plan.controls.len(), 40);
        let traj = propagate(&prob.x0, &plan.controls, &prob.params, &prob.disc).unwrap();
        let s = traj.terminal();
        assert!((s.x + 7.0).abs() < 1e-9 && (s.y + 1.0).abs() < 1e-9, "{s:?}");
        assert!(wrap_angle(s.phi + PI / 2.0).abs() < 1e-9);
        assert!(s.v_r.abs() < 1e-9 && s.v_l.abs() < 1e-9);
        assert!(fits(&prob, &plan.controls));
    }

    #[test]
    fn already_at_target() {
        let prob = problem(State::at_rest(1.0, 2.0, 0.3), Pose { x: 1.0, y: 2.0, phi: 0.3 }, 10);
        let plan = make_initial_guess(&prob, 0.5).unwrap();
        assert!(plan.controls.iter().all(|c| c.u_r == 0.0 && c.u_l == 0.0 && c.t_s == 0.01));
    }

    #[test]
    fn pure_rotation_and_few_steps() {
        let prob = problem(State::zero(), Pose { x: 0.0, y: 0.0, phi: 3.0 }, 5);
        let plan = make_initial_guess(&prob, 0.5).unwrap();
        let s = *propagate(&prob.x0, &plan.controls, &prob.params, &prob.disc).unwrap().terminal();
        assert!((s.phi - 3.0).abs() < 1e-9 && s.x.abs() < 1e-12);

        // one step cannot hold a two-step profile
        let prob = problem(State::zero(), Pose { x: 1.0, y: 0.0, phi: 0.0 }, 1);
        assert_eq!(make_initial_guess(&prob, 0.5).unwrap().controls.len(), 1);
    }

    #[test]
    fn allocation_is_proportional() {
        let mut phases = vec![(Phase::Rotate(1.0), 0.25), (Phase::Translate(10.0), 10.0), (Phase::Rotate(1.0), 0.25)];
        let c = allocate(40, &mut phases);
        assert_eq!(c.iter().sum::<usize>(), 40);
        assert!(c[0] >= 2 && c[2] >= 2 && c[1] > 30);
    }

    #[test]
    fn rejects_bad_speed() {
        let prob = problem(State::zero(), Pose { x: 1.0, y: 0.0, phi: 0.0 }, 4);
        assert!(make_initial_guess(&prob, 0.0).is_err());
    }
}
