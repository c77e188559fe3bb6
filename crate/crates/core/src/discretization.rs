//! Sampled-data model: truncated Taylor-Lie step with a per-step sampling
//! period, a fine-grained RK4 reference integrator, and trajectory propagation.
//!
//! With piecewise-constant input `u` over a step of length `T`,
//!
//! ```text
//! x(k+1) = x(k) + sum_{l=1..l_max} D_l(x(k), u(k)) T^l / l!
//! D_1 = f(x) + g(x) u,   D_{l+1} = (dD_l/dx) (f(x) + g(x) u)
//! ```
//!
//! `D_l` is the `l`-th time derivative of the state along the frozen-input
//! flow. Orders 1 and 2 use closed forms; higher orders are generated by
//! Taylor-coefficient recurrences of that flow.

use crate::error::{Error, Result};
use crate::robot::{dynamics_unchecked, RobotParams, State, WheelAccel};
use crate::scalar::Scalar;

/// One decision triple: wheel accelerations held over a sampling period.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Control<T> {
    pub u_r: T,
    pub u_l: T,
    /// Sampling period (s).
    pub t_s: T,
}

impl<T: Scalar> Control<T> {
    pub fn new(u_r: T, u_l: T, t_s: T) -> Self {
        Self { u_r, u_l, t_s }
    }

    pub fn accel(&self) -> WheelAccel<T> {
        WheelAccel { u_r: self.u_r, u_l: self.u_l }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiscretizationConfig {
    ell_max: usize,
    oracle_substeps: usize,
    divergence_bound: f64,
}

impl Default for DiscretizationConfig {
    fn default() -> Self {
        Self { ell_max: 2, oracle_substeps: 64, divergence_bound: 1e9 }
    }
}

impl DiscretizationConfig {
    pub fn new(ell_max: usize, oracle_substeps: usize) -> Result<Self> {
        if ell_max == 0 {
            return Err(Error::UnsupportedOrder(0));
        }
        if oracle_substeps == 0 {
            return Err(Error::InvalidParams("oracle_substeps must be >= 1".into()));
        }
        Ok(Self { ell_max, oracle_substeps, ..Self::default() })
    }

    /// Magnitude above which [`propagate`] reports divergence.
    pub fn with_divergence_bound(mut self, bound: f64) -> Result<Self> {
        if !(bound > 0.0) {
            return Err(Error::InvalidParams("divergence bound must be > 0".into()));
        }
        self.divergence_bound = bound;
        Ok(self)
    }

    pub fn ell_max(&self) -> usize {
        self.ell_max
    }

    pub fn oracle_substeps(&self) -> usize {
        self.oracle_substeps
    }

    pub fn divergence_bound(&self) -> f64 {
        self.divergence_bound
    }
}

/// State sequence of length `N + 1` and the `N` controls that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<T> {
    pub states: Vec<State<T>>,
    pub controls: Vec<Control<T>>,
}

impl<T: Scalar> Trajectory<T> {
    pub fn steps(&self) -> usize {
        self.controls.len()
    }

    pub fn terminal(&self) -> &State<T> {
        self.states.last().expect("trajectory always holds the initial state")
    }

    /// Sum of the sampling periods.
    pub fn duration(&self) -> T {
        self.controls.iter().fold(T::zero(), |acc, c| acc + c.t_s)
    }
}

/// Second Lie derivative, `(df/dx) f` for this model.
fn second_lie<T: Scalar>(s: &State<T>, u: &WheelAccel<T>, p: &RobotParams<T>) -> [T; 7] {
    let half_r = p.r / T::of(2.0);
    let sum = s.v_r + s.v_l;
    let phi_dot = half_r / p.b * (s.v_r - s.v_l);
    let accel_sum = u.u_r + u.u_l;
    let (sin, cos) = s.phi.sin_cos();
    [
        half_r * (cos * accel_sum - sin * sum * phi_dot),
        half_r * (sin * accel_sum + cos * sum * phi_dot),
        half_r / p.b * (u.u_r - u.u_l),
        u.u_r,
        u.u_l,
        T::zero(),
        T::zero(),
    ]
}

/// Taylor coefficients `c_0..=c_order` of the frozen-input flow, so that
/// `x(t) = sum_j c_j t^j` and `D_l = l! c_l`.
pub fn flow_coefficients<T: Scalar>(s: &State<T>, u: &WheelAccel<T>, p: &RobotParams<T>, order: usize) -> Vec<[T; 7]> {
    let n = order + 1;
    let z = T::zero();
    let half_r = p.r / T::of(2.0);
    let rot = half_r / p.b;

    // wheel velocities are affine in time
    let coef = |a0: T, a1: T, j: usize| match j {
        0 => a0,
        1 => a1,
        _ => z,
    };
    let vr = |j| coef(s.v_r, u.u_r, j);
    let vl = |j| coef(s.v_l, u.u_l, j);

    let mut phi = vec![z; n];
    let mut sin = vec![z; n];
    let mut cos = vec![z; n];
    let mut out = vec![[z; 7]; n];
    out[0] = s.to_array();
    phi[0] = s.phi;
    let (s0, c0) = s.phi.sin_cos();
    sin[0] = s0;
    cos[0] = c0;

    for j in 0..order {
        // sin/cos coefficients of phi(t) at index j need phi[1..=j]
        if j > 0 {
            let (mut sj, mut cj) = (z, z);
            for i in 1..=j {
                let w = T::of(i as f64) * phi[i];
                sj = sj + w * cos[j - i];
                cj = cj - w * sin[j - i];
            }
            let inv = T::of(1.0 / j as f64);
            sin[j] = sj * inv;
            cos[j] = cj * inv;
        }
        let (mut cs, mut ss) = (z, z);
        for i in 0..=j {
            let sum = vr(j - i) + vl(j - i);
            cs = cs + cos[i] * sum;
            ss = ss + sin[i] * sum;
        }
        let inv = T::of(1.0 / (j + 1) as f64);
        let next = [
            half_r * cs * inv,
            half_r * ss * inv,
            rot * (vr(j) - vl(j)) * inv,
            vr(j) * inv,
            vl(j) * inv,
            if j == 0 { u.u_r } else { z },
            if j == 0 { u.u_l } else { z },
        ];
        phi[j + 1] = next[2];
        out[j + 1] = next;
    }
    out
}

/// `l`-th Lie derivative of the state along `f(x) + g(x) u`.
pub fn lie_term<T: Scalar>(s: &State<T>, u: &WheelAccel<T>, ell: usize, p: &RobotParams<T>) -> Result<[T; 7]> {
    match ell {
        0 => Err(Error::UnsupportedOrder(0)),
        1 => Ok(dynamics_unchecked(s, u, p)),
        2 => Ok(second_lie(s, u, p)),
        _ => {
            let c = flow_coefficients(s, u, p, ell);
            let fact = (1..=ell).fold(1.0, |acc, k| acc * k as f64);
            Ok(c[ell].map(|v| v * T::of(fact)))
        }
    }
}

/// One truncated Taylor step of length `c.t_s`.
pub fn taylor_step<T: Scalar>(
    s: &State<T>,
    c: &Control<T>,
    p: &RobotParams<T>,
    cfg: &DiscretizationConfig,
) -> State<T> {
    let u = c.accel();
    let h = c.t_s;
    let mut x = s.to_array();
    match cfg.ell_max {
        1 => {
            let d1 = dynamics_unchecked(s, &u, p);
            for i in 0..7 {
                x[i] = x[i] + h * d1[i];
            }
        }
        2 => {
            let d1 = dynamics_unchecked(s, &u, p);
            let d2 = second_lie(s, &u, p);
            let half_h2 = h * h / T::of(2.0);
            for i in 0..7 {
                x[i] = x[i] + h * d1[i] + half_h2 * d2[i];
            }
        }
        order => {
            let coef = flow_coefficients(s, &u, p, order);
            for i in 0..7 {
                let mut acc = T::zero();
                for c in coef[1..].iter().rev() {
                    acc = (acc + c[i]) * h;
                }
                x[i] = x[i] + acc;
            }
        }
    }
    State::from_array(x)
}

/// Classical RK4 over `oracle_substeps` equal substeps with the input held
/// constant. Used as a reference for [`taylor_step`].
pub fn oracle_step<T: Scalar>(
    s: &State<T>,
    c: &Control<T>,
    p: &RobotParams<T>,
    cfg: &DiscretizationConfig,
) -> State<T> {
    let u = c.accel();
    let n = cfg.oracle_substeps;
    let h = c.t_s / T::of(n as f64);
    let half = T::of(0.5);
    let sixth = T::of(1.0 / 6.0);
    let two = T::of(2.0);
    let f = |x: &[T; 7]| dynamics_unchecked(&State::from_array(*x), &u, p);
    let axpy = |x: &[T; 7], a: T, k: &[T; 7]| {
        let mut y = *x;
        for i in 0..7 {
            y[i] = y[i] + a * k[i];
        }
        y
    };
    let mut x = s.to_array();
    for _ in 0..n {
        let k1 = f(&x);
        let k2 = f(&axpy(&x, half * h, &k1));
        let k3 = f(&axpy(&x, half * h, &k2));
        let k4 = f(&axpy(&x, h, &k3));
        for i in 0..7 {
            x[i] = x[i] + h * sixth * (k1[i] + two * k2[i] + two * k3[i] + k4[i]);
        }
    }
    State::from_array(x)
}

/// Runs [`taylor_step`] over a control sequence starting from `x0`.
pub fn propagate<T: Scalar>(
    x0: &State<T>,
    controls: &[Control<T>],
    p: &RobotParams<T>,
    cfg: &DiscretizationConfig,
) -> Result<Trajectory<T>> {
    if !x0.is_finite() {
        return Err(Error::InvalidInput("non-finite initial state".into()));
    }
    let bound = T::of(cfg.divergence_bound);
    let mut states = Vec::with_capacity(controls.len() + 1);
    states.push(*x0);
    let mut s = *x0;
    for (k, c) in controls.iter().enumerate() {
        s = taylor_step(&s, c, p, cfg);
        if !s.is_finite() || s.max_abs() > bound {
            return Err(Error::PropagationDiverged { step: k, bound: cfg.divergence_bound });
        }
        states.push(s);
    }
    Ok(Trajectory { states, controls: controls.to_vec() })
}
