//! Inequality constraints `g <= 0` and their fixed ordering.
//!
//! For `N` steps the vector is laid out as
//!
//! | rows                | meaning                                         |
//! |---------------------|-------------------------------------------------|
//! | `0 .. N`            | `T_s(k) - T_max`                                |
//! | `N .. 2N`           | `T_min - T_s(k)`                                |
//! | `2N .. 4N`          | `tau_w(k) - tau_max`, `w = R, L` interleaved    |
//! | `4N .. 6N`          | `tau_min - tau_w(k)`, `w = R, L` interleaved    |
//! | `6N .. 6N+10`       | terminal pairs, see [`TerminalRow`]             |
//! | then, if enabled    | acceleration box, 4 rows per step               |
//! | then, if enabled    | wheel-speed box on states `1..=N`, 4 rows each  |
//!
//! Absolute-value terminal conditions `|a| - eps <= 0` appear as the smooth
//! pair `a - eps <= 0`, `-a - eps <= 0`.

use crate::discretization::Trajectory;
use crate::error::{Error, Result};
use crate::robot::{body_from_wheel, torque_from_accel, RobotParams, State};
use crate::scalar::{wrap_angle, Scalar};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Pose<T> {
    pub x: T,
    pub y: T,
    pub phi: T,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstraintConfig<T> {
    pub t_min: T,
    pub t_max: T,
    pub tau_min: T,
    pub tau_max: T,
    /// Cartesian terminal tolerance (m).
    pub eps: T,
    /// Heading terminal tolerance (rad).
    pub eps_phi: T,
    /// Terminal body-velocity tolerance, applied to `v` and `omega` separately.
    pub eps_v: T,
    pub target: Pose<T>,
    /// Wrap the heading error into `(-pi, pi]`.
    pub wrap_angle: bool,
    /// Optional `[min, max]` box on wheel accelerations.
    pub accel_bounds: Option<[T; 2]>,
    /// Optional `[min, max]` box on wheel angular velocities.
    pub wheel_speed_bounds: Option<[T; 2]>,
}

impl<T: Scalar> ConstraintConfig<T> {
    /// Reference limits: `T_s` in `[0.01, 2]` s, torque in `[-1, 1]`,
    /// `eps = 1e-3` m, `eps_phi = 1e-7` rad, `eps_v = 1e-9`.
    pub fn strict(target: Pose<T>) -> Self {
        Self {
            t_min: T::of(0.01),
            t_max: T::of(2.0),
            tau_min: T::of(-1.0),
            tau_max: T::of(1.0),
            eps: T::of(1e-3),
            eps_phi: T::of(1e-7),
            eps_v: T::of(1e-9),
            target,
            wrap_angle: true,
            accel_bounds: None,
            wheel_speed_bounds: None,
        }
    }

    /// Reference limits with the heading and velocity tolerances relaxed to
    /// `1e-4` rad and `1e-6`.
    pub fn desk(target: Pose<T>) -> Self {
        Self { eps_phi: T::of(1e-4), eps_v: T::of(1e-6), ..Self::strict(target) }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParams(m.into()));
        let finite = [
            self.t_min,
            self.t_max,
            self.tau_min,
            self.tau_max,
            self.eps,
            self.eps_phi,
            self.eps_v,
            self.target.x,
            self.target.y,
            self.target.phi,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return bad("constraint parameters must be finite");
        }
        if !(T::zero() < self.t_min && self.t_min < self.t_max) {
            return bad("require 0 < T_min < T_max");
        }
        if !(self.tau_min < self.tau_max) {
            return bad("require tau_min < tau_max");
        }
        if self.eps < T::zero() || self.eps_phi < T::zero() || self.eps_v < T::zero() {
            return bad("terminal tolerances must be >= 0");
        }
        for (name, b) in [("acceleration", self.accel_bounds), ("wheel speed", self.wheel_speed_bounds)] {
            if let Some([lo, hi]) = b {
                if !(lo < hi) {
                    return Err(Error::InvalidParams(format!("{name} bounds need min < max")));
                }
            }
        }
        Ok(())
    }
}

/// Terminal rows, offsets from [`ConstraintLayout::terminal`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(usize)]
pub enum TerminalRow {
    XUpper = 0,
    XLower,
    YUpper,
    YLower,
    PhiUpper,
    PhiLower,
    VUpper,
    VLower,
    OmegaUpper,
    OmegaLower,
}

pub const TERMINAL_ROWS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConstraintLayout {
    steps: usize,
    accel: bool,
    speed: bool,
}

impl ConstraintLayout {
    pub fn new<T>(steps: usize, cfg: &ConstraintConfig<T>) -> Self {
        Self { steps, accel: cfg.accel_bounds.is_some(), speed: cfg.wheel_speed_bounds.is_some() }
    }

    pub fn period_upper(&self, k: usize) -> usize {
        k
    }

    pub fn period_lower(&self, k: usize) -> usize {
        self.steps + k
    }

    /// `wheel` is 0 for right, 1 for left.
    pub fn torque_upper(&self, k: usize, wheel: usize) -> usize {
        2 * self.steps + 2 * k + wheel
    }

    pub fn torque_lower(&self, k: usize, wheel: usize) -> usize {
        4 * self.steps + 2 * k + wheel
    }

    pub fn terminal(&self, row: TerminalRow) -> usize {
        6 * self.steps + row as usize
    }

    /// First row after the period bounds; the solver treats rows before it as
    /// simple bounds.
    pub fn general_start(&self) -> usize {
        2 * self.steps
    }

    pub fn accel_start(&self) -> Option<usize> {
        self.accel.then_some(6 * self.steps + TERMINAL_ROWS)
    }

    pub fn speed_start(&self) -> Option<usize> {
        self.speed.then_some(6 * self.steps + TERMINAL_ROWS + if self.accel { 4 * self.steps } else { 0 })
    }

    pub fn len(&self) -> usize {
        let extra = (self.accel as usize + self.speed as usize) * 4 * self.steps;
        6 * self.steps + TERMINAL_ROWS + extra
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Count before splitting absolute values and per-wheel torques:
    /// `4N + 4` (two period bounds and two torque bounds per step, four
    /// terminal conditions).
    pub fn logical_count(&self) -> usize {
        4 * self.steps + 4
    }
}

/// Heading error used by the terminal rows.
pub fn heading_error<T: Scalar>(phi: T, cfg: &ConstraintConfig<T>) -> T {
    let d = phi - cfg.target.phi;
    if cfg.wrap_angle {
        wrap_angle(d)
    } else {
        d
    }
}

/// The ten terminal rows as functions of the final state.
pub fn terminal_rows<T: Scalar>(s: &State<T>, cfg: &ConstraintConfig<T>, p: &RobotParams<T>) -> [T; TERMINAL_ROWS] {
    let dx = s.x - cfg.target.x;
    let dy = s.y - cfg.target.y;
    let dphi = heading_error(s.phi, cfg);
    let body = body_from_wheel(&s.wheel_velocity(), p);
    [
        dx - cfg.eps,
        -dx - cfg.eps,
        dy - cfg.eps,
        -dy - cfg.eps,
        dphi - cfg.eps_phi,
        -dphi - cfg.eps_phi,
        body.v - cfg.eps_v,
        -body.v - cfg.eps_v,
        body.omega - cfg.eps_v,
        -body.omega - cfg.eps_v,
    ]
}

/// Full constraint vector in [`ConstraintLayout`] order.
pub fn eval_constraints<T: Scalar>(traj: &Trajectory<T>, cfg: &ConstraintConfig<T>, p: &RobotParams<T>) -> Vec<T> {
    let n = traj.steps();
    let layout = ConstraintLayout::new(n, cfg);
    let mut g = vec![T::zero(); layout.len()];
    for (k, (s, c)) in traj.states.iter().zip(&traj.controls).enumerate() {
        g[layout.period_upper(k)] = c.t_s - cfg.t_max;
        g[layout.period_lower(k)] = cfg.t_min - c.t_s;
        let tau = torque_from_accel(&c.accel(), &s.wheel_velocity(), p);
        for (w, t) in [tau.tau_r, tau.tau_l].into_iter().enumerate() {
            g[layout.torque_upper(k, w)] = t - cfg.tau_max;
            g[layout.torque_lower(k, w)] = cfg.tau_min - t;
        }
    }
    let term = terminal_rows(traj.terminal(), cfg, p);
    let t0 = layout.terminal(TerminalRow::XUpper);
    g[t0..t0 + TERMINAL_ROWS].copy_from_slice(&term);
    if let (Some(start), Some([lo, hi])) = (layout.accel_start(), cfg.accel_bounds) {
        for (k, c) in traj.controls.iter().enumerate() {
            let r = start + 4 * k;
            g[r..r + 4].copy_from_slice(&[c.u_r - hi, c.u_l - hi, lo - c.u_r, lo - c.u_l]);
        }
    }
    if let (Some(start), Some([lo, hi])) = (layout.speed_start(), cfg.wheel_speed_bounds) {
        for (k, s) in traj.states[1..].iter().enumerate() {
            let r = start + 4 * k;
            g[r..r + 4].copy_from_slice(&[s.v_r - hi, s.v_l - hi, lo - s.v_r, lo - s.v_l]);
        }
    }
    g
}
