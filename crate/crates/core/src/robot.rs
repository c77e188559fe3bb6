//! Differential-drive robot model: parameters, continuous dynamics, the
//! feedback-linearizing torque map, and wheel/body velocity transforms.
//!
//! Wheel velocity dynamics are feedback-linearized (`tau = M u + V nu`) so the
//! state evolves as
//!
//! ```text
//! x'   = (r/2)  cos(phi) (v_R + v_L)
//! y'   = (r/2)  sin(phi) (v_R + v_L)
//! phi' = (r/2b) (v_R - v_L)
//! theta_R' = v_R,  theta_L' = v_L
//! v_R' = u_R,      v_L' = u_L
//! ```

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Tolerance on `|M - M^T|` accepted by [`RobotParams::new`].
pub const SYMMETRY_TOL: f64 = 1e-12;

pub type Mat2<T> = [[T; 2]; 2];

#[inline]
fn mat2_vec<T: Scalar>(m: &Mat2<T>, a: T, b: T) -> (T, T) {
    (m[0][0] * a + m[0][1] * b, m[1][0] * a + m[1][1] * b)
}

/// Physical parameters of the robot.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RobotParams<T> {
    /// Wheel radius (m).
    pub r: T,
    /// Half axle length (m).
    pub b: T,
    /// Inertia matrix, symmetric positive definite.
    pub m: Mat2<T>,
    /// Constant Coriolis/damping matrix.
    pub v: Mat2<T>,
}

impl<T: Scalar> RobotParams<T> {
    pub fn new(r: T, b: T, m: Mat2<T>, v: Mat2<T>) -> Result<Self> {
        let p = Self { r, b, m, v };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.r,
            self.b,
            self.m[0][0],
            self.m[0][1],
            self.m[1][0],
            self.m[1][1],
            self.v[0][0],
            self.v[0][1],
            self.v[1][0],
            self.v[1][1],
        ];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParams("non-finite robot parameter".into()));
        }
        if self.r <= T::zero() {
            return Err(Error::InvalidParams(format!("wheel radius r must be > 0, got {}", self.r)));
        }
        if self.b <= T::zero() {
            return Err(Error::InvalidParams(format!("body radius b must be > 0, got {}", self.b)));
        }
        if (self.m[0][1] - self.m[1][0]).abs() > T::of(SYMMETRY_TOL) {
            return Err(Error::InvalidParams("inertia matrix M is not symmetric".into()));
        }
        // 2x2 symmetric: positive definite iff leading minors are positive
        let det = self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0];
        if self.m[0][0] <= T::zero() || det <= T::zero() {
            return Err(Error::InvalidParams("inertia matrix M is not positive definite".into()));
        }
        Ok(())
    }

    /// Converts every parameter into another scalar type.
    pub fn cast<U: Scalar>(&self) -> RobotParams<U> {
        let c = |x: T| U::of(x.to_f64_lossy());
        let cm = |m: &Mat2<T>| [[c(m[0][0]), c(m[0][1])], [c(m[1][0]), c(m[1][1])]];
        RobotParams { r: c(self.r), b: c(self.b), m: cm(&self.m), v: cm(&self.v) }
    }
}

impl<T: Scalar> Default for RobotParams<T> {
    /// Desk-scale defaults: r = 0.1 m, b = 0.25 m,
    /// M = [[0.3, 0.05], [0.05, 0.3]], V = 0.
    fn default() -> Self {
        let z = T::zero();
        Self {
            r: T::of(0.1),
            b: T::of(0.25),
            m: [[T::of(0.3), T::of(0.05)], [T::of(0.05), T::of(0.3)]],
            v: [[z, z], [z, z]],
        }
    }
}

/// Robot state `[x, y, phi, theta_R, theta_L, v_R, v_L]`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct State<T> {
    pub x: T,
    pub y: T,
    pub phi: T,
    pub theta_r: T,
    pub theta_l: T,
    pub v_r: T,
    pub v_l: T,
}

impl<T: Scalar> State<T> {
    pub const DIM: usize = 7;

    pub fn zero() -> Self {
        Self::from_array([T::zero(); 7])
    }

    /// Pose at rest with zero wheel angles.
    pub fn at_rest(x: T, y: T, phi: T) -> Self {
        Self { x, y, phi, ..Self::zero() }
    }

    pub fn from_array(a: [T; 7]) -> Self {
        Self { x: a[0], y: a[1], phi: a[2], theta_r: a[3], theta_l: a[4], v_r: a[5], v_l: a[6] }
    }

    pub fn to_array(&self) -> [T; 7] {
        [self.x, self.y, self.phi, self.theta_r, self.theta_l, self.v_r, self.v_l]
    }

    pub fn wheel_velocity(&self) -> WheelVelocity<T> {
        WheelVelocity { v_r: self.v_r, v_l: self.v_l }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|x| x.is_finite())
    }

    pub fn max_abs(&self) -> T {
        self.to_array().iter().fold(T::zero(), |m, x| m.max(x.abs()))
    }

    pub fn cast<U: Scalar>(&self) -> State<U> {
        State::from_array(self.to_array().map(|x| U::of(x.to_f64_lossy())))
    }
}

/// Wheel angular velocities `nu = [v_R, v_L]` (rad/s).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct WheelVelocity<T> {
    pub v_r: T,
    pub v_l: T,
}

/// Body linear and angular velocity.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BodyVelocity<T> {
    pub v: T,
    pub omega: T,
}

/// Wheel angular accelerations (the feedback-linearized input).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct WheelAccel<T> {
    pub u_r: T,
    pub u_l: T,
}

/// Wheel torques.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Torque<T> {
    pub tau_r: T,
    pub tau_l: T,
}

impl<T: Scalar> Torque<T> {
    pub fn norm_sq(&self) -> T {
        self.tau_r * self.tau_r + self.tau_l * self.tau_l
    }
}

impl<T: Scalar> BodyVelocity<T> {
    pub fn norm_sq(&self) -> T {
        self.v * self.v + self.omega * self.omega
    }
}

/// Time derivative of the state under wheel accelerations `u`.
pub fn continuous_dynamics<T: Scalar>(s: &State<T>, u: &WheelAccel<T>, p: &RobotParams<T>) -> Result<[T; 7]> {
    if !s.is_finite() || !u.u_r.is_finite() || !u.u_l.is_finite() {
        return Err(Error::InvalidInput("non-finite state or acceleration".into()));
    }
    Ok(dynamics_unchecked(s, u, p))
}

#[inline]
pub(crate) fn dynamics_unchecked<T: Scalar>(s: &State<T>, u: &WheelAccel<T>, p: &RobotParams<T>) -> [T; 7] {
    let half_r = p.r / T::of(2.0);
    let sum = s.v_r + s.v_l;
    let (sin, cos) = s.phi.sin_cos();
    [half_r * cos * sum, half_r * sin * sum, half_r / p.b * (s.v_r - s.v_l), s.v_r, s.v_l, u.u_r, u.u_l]
}

/// Feedback-linearizing torque `tau = M u + V nu`.
pub fn torque_from_accel<T: Scalar>(u: &WheelAccel<T>, nu: &WheelVelocity<T>, p: &RobotParams<T>) -> Torque<T> {
    let (mr, ml) = mat2_vec(&p.m, u.u_r, u.u_l);
    let (vr, vl) = mat2_vec(&p.v, nu.v_r, nu.v_l);
    Torque { tau_r: mr + vr, tau_l: ml + vl }
}

/// Body velocity from wheel velocities, the analytic inverse of
/// `Omega = [[1/r, b/r], [1/r, -b/r]]`.
pub fn body_from_wheel<T: Scalar>(nu: &WheelVelocity<T>, p: &RobotParams<T>) -> BodyVelocity<T> {
    let half_r = p.r / T::of(2.0);
    BodyVelocity { v: half_r * (nu.v_r + nu.v_l), omega: half_r / p.b * (nu.v_r - nu.v_l) }
}

/// Wheel velocities from body velocity, `nu = Omega v`.
pub fn wheel_from_body<T: Scalar>(bv: &BodyVelocity<T>, p: &RobotParams<T>) -> WheelVelocity<T> {
    WheelVelocity { v_r: (bv.v + p.b * bv.omega) / p.r, v_l: (bv.v - p.b * bv.omega) / p.r }
}
