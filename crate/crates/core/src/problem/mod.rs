//! Transcription of the time-energy optimal control problem into an NLP.
//!
//! Decision vector layout (length `3N`):
//!
//! ```text
//! [u_R(0), u_L(0), T_s(0), u_R(1), u_L(1), T_s(1), ..., u_R(N-1), u_L(N-1), T_s(N-1)]
//! ```
//!
//! The running cost `L = tau' R tau + E_KE + beta` is accumulated with the
//! left-endpoint rule `z(k+1) = z(k) + T_s(k) L(x(k), u(k))`, and the
//! objective is `z(N)`. See [`constraints::ConstraintLayout`] for the order of
//! the constraint vector.

pub mod constraints;
mod sensitivity;

pub use constraints::{eval_constraints, ConstraintConfig, ConstraintLayout, Pose};
pub use sensitivity::{objective_and_gradient, Evaluation};

use crate::discretization::{Control, DiscretizationConfig, Trajectory};
use crate::error::{Error, Result};
use crate::robot::{body_from_wheel, torque_from_accel, RobotParams, State, WheelAccel};
use crate::scalar::Scalar;

/// Which velocities the kinetic-energy term penalizes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum KineticForm {
    /// `nu' P nu` on wheel angular velocities.
    Wheel,
    /// `v' P v` on body velocities `(v, omega)`.
    #[default]
    Body,
}

/// Cost weights. `R` and `P` are diagonal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Weights<T> {
    pub r: [T; 2],
    pub p: [T; 2],
    pub beta: T,
    pub ke_form: KineticForm,
}

impl<T: Scalar> Weights<T> {
    pub fn new(r: [T; 2], p: [T; 2], beta: T, ke_form: KineticForm) -> Result<Self> {
        let w = Self { r, p, beta, ke_form };
        w.validate()?;
        Ok(w)
    }

    /// `R = P = alpha I`.
    pub fn from_alpha(alpha: T, beta: T, ke_form: KineticForm) -> Result<Self> {
        Self::new([alpha; 2], [alpha; 2], beta, ke_form)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.r[0], self.r[1], self.p[0], self.p[1], self.beta];
        if all.iter().any(|v| !v.is_finite() || *v < T::zero()) {
            return Err(Error::InvalidParams("weights must be finite and >= 0".into()));
        }
        if all.iter().all(|v| *v == T::zero()) {
            return Err(Error::InvalidParams("at least one of R, P, beta must be nonzero".into()));
        }
        Ok(())
    }

    /// Every weight multiplied by `c`.
    pub fn scaled(&self, c: T) -> Self {
        Self { r: self.r.map(|v| v * c), p: self.p.map(|v| v * c), beta: self.beta * c, ke_form: self.ke_form }
    }

    pub fn cast<U: Scalar>(&self) -> Weights<U> {
        let c = |v: T| U::of(v.to_f64_lossy());
        Weights { r: self.r.map(c), p: self.p.map(c), beta: c(self.beta), ke_form: self.ke_form }
    }
}

/// Gains of the post-hoc energy measure.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricGains<T> {
    pub k_tau: T,
    pub k_m: T,
}

impl<T: Scalar> Default for MetricGains<T> {
    fn default() -> Self {
        Self { k_tau: T::one(), k_m: T::one() }
    }
}

impl<T: Scalar> MetricGains<T> {
    pub fn new(k_tau: T, k_m: T) -> Result<Self> {
        if !(k_tau >= T::zero()) || !(k_m >= T::zero()) {
            return Err(Error::InvalidParams("metric gains must be >= 0".into()));
        }
        Ok(Self { k_tau, k_m })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metrics<T> {
    /// `sum_k T_s(k) [k_tau |tau(k)|^2 + k_m |v(k)|^2]`.
    pub energy: T,
    /// `sum_k T_s(k)`.
    pub final_time: T,
}

/// Complete NLP description. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct NlpProblem<T> {
    pub x0: State<T>,
    pub steps: usize,
    pub params: RobotParams<T>,
    pub weights: Weights<T>,
    pub constraints: ConstraintConfig<T>,
    pub disc: DiscretizationConfig,
}

impl<T: Scalar> NlpProblem<T> {
    pub fn new(
        x0: State<T>,
        steps: usize,
        params: RobotParams<T>,
        weights: Weights<T>,
        constraints: ConstraintConfig<T>,
        disc: DiscretizationConfig,
    ) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidParams("step count N must be >= 1".into()));
        }
        if !x0.is_finite() {
            return Err(Error::InvalidInput("non-finite initial state".into()));
        }
        params.validate()?;
        weights.validate()?;
        constraints.validate()?;
        Ok(Self { x0, steps, params, weights, constraints, disc })
    }

    pub fn num_vars(&self) -> usize {
        3 * self.steps
    }

    pub fn layout(&self) -> ConstraintLayout {
        ConstraintLayout::new(self.steps, &self.constraints)
    }

    /// Same problem with `(R, P, beta)` scaled by `c`.
    pub fn with_scaled_weights(&self, c: T) -> Self {
        Self { weights: self.weights.scaled(c), ..self.clone() }
    }
}

pub fn pack<T: Scalar>(controls: &[Control<T>]) -> Vec<T> {
    controls.iter().flat_map(|c| [c.u_r, c.u_l, c.t_s]).collect()
}

pub fn unpack<T: Scalar>(z: &[T], steps: usize) -> Result<Vec<Control<T>>> {
    if z.len() != 3 * steps {
        return Err(Error::LengthMismatch { expected: 3 * steps, got: z.len() });
    }
    Ok(z.chunks_exact(3).map(|c| Control::new(c[0], c[1], c[2])).collect())
}

/// Running cost rate `L = tau' R tau + E_KE + beta` (cost per second).
pub fn lagrangian<T: Scalar>(s: &State<T>, u: &WheelAccel<T>, w: &Weights<T>, p: &RobotParams<T>) -> T {
    let nu = s.wheel_velocity();
    let tau = torque_from_accel(u, &nu, p);
    let input = w.r[0] * tau.tau_r * tau.tau_r + w.r[1] * tau.tau_l * tau.tau_l;
    let kinetic = match w.ke_form {
        KineticForm::Wheel => w.p[0] * nu.v_r * nu.v_r + w.p[1] * nu.v_l * nu.v_l,
        KineticForm::Body => {
            let b = body_from_wheel(&nu, p);
            w.p[0] * b.v * b.v + w.p[1] * b.omega * b.omega
        }
    };
    input + kinetic + w.beta
}

/// Terminal value `z(N)` of the cost accumulator.
pub fn accumulate_cost<T: Scalar>(traj: &Trajectory<T>, w: &Weights<T>, p: &RobotParams<T>) -> T {
    let mut z = T::zero();
    for (s, c) in traj.states.iter().zip(&traj.controls) {
        z = z + c.t_s * lagrangian(s, &c.accel(), w, p);
    }
    z
}

/// Total energy and final time of a trajectory.
pub fn metrics<T: Scalar>(traj: &Trajectory<T>, gains: &MetricGains<T>, p: &RobotParams<T>) -> Metrics<T> {
    let mut energy = T::zero();
    for (s, c) in traj.states.iter().zip(&traj.controls) {
        let nu = s.wheel_velocity();
        let tau = torque_from_accel(&c.accel(), &nu, p);
        let body = body_from_wheel(&nu, p);
        energy = energy + c.t_s * (gains.k_tau * tau.norm_sq() + gains.k_m * body.norm_sq());
    }
    Metrics { energy, final_time: traj.duration() }
}
