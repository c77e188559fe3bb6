//! Scenario and sweep descriptions, loaded from flat-key TOML files.
//!
//! Scenario keys (all optional except `target.*`):
//!
//! | key | meaning | default |
//! |---|---|---|
//! | `name` | output file stem | `"scenario"` |
//! | `profile` | `"desk"` or `"strict"` tolerances | `"desk"` |
//! | `steps` | horizon `N` | 40 |
//! | `start.x`, `start.y`, `start.phi`, `start.v_r`, `start.v_l` | initial state | 0 |
//! | `target.x`, `target.y`, `target.phi` | final pose | required |
//! | `robot.r`, `robot.b` | wheel radius, half axle | 0.1, 0.25 |
//! | `robot.m`, `robot.v` | 2x2 matrices, row-major `[a, b, c, d]` | see [`RobotParams`] |
//! | `weights.alpha` | `R = P = alpha I` | 1 |
//! | `weights.r`, `weights.p` | diagonals, override `alpha` | |
//! | `weights.beta` | time weight | 1 |
//! | `weights.kinetic` | `"body"` or `"wheel"` | `"body"` |
//! | `constraints.t_min`, `t_max`, `tau_min`, `tau_max`, `eps`, `eps_phi`, `eps_v` | bounds | per profile |
//! | `constraints.wrap_angle` | compare headings modulo `2 pi` | true |
//! | `constraints.accel_bounds`, `constraints.wheel_speed_bounds` | optional `[lo, hi]` boxes | off |
//! | `metrics.k_tau`, `metrics.k_m` | energy gains | 1, 1 |
//! | `discretization.ell_max`, `discretization.oracle_substeps` | Taylor order, RK4 substeps | 2, 64 |
//! | `solver.*` | any [`SolverOptions`] field | profile, `max_iter` 5000 |
//! | `guess.v_ref` | reference speed of the initial guess | 0.5 |
//!
//! Sweep files add `sweep.alpha` and `sweep.beta` (lists) and optionally
//! `sweep.workers`.

use std::f64::consts::PI;
use std::path::Path;

use ddtraj_core::discretization::DiscretizationConfig;
use ddtraj_core::problem::KineticForm;
use ddtraj_core::solver::{SolverOptions, DEFAULT_V_REF};
use ddtraj_core::{ConstraintConfig, MetricGains, NlpProblem, Pose, RobotParams, State, Weights};

use crate::config::Keys;
use crate::error::{Error, Result};

/// Iteration cap used by the runner. Converging the pure-time cases from the
/// heuristic guess typically needs one to two thousand iterations.
pub const RUNNER_MAX_ITER: usize = 5000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Profile {
    /// Relaxed heading and velocity tolerances, `kkt_tol = 1e-6`.
    #[default]
    Desk,
    /// Tight terminal tolerances, `kkt_tol = 1e-9`.
    Strict,
}

impl Profile {
    fn constraints(self, target: Pose) -> ConstraintConfig {
        match self {
            Profile::Desk => ConstraintConfig::desk(target),
            Profile::Strict => ConstraintConfig::strict(target),
        }
    }

    fn solver(self) -> SolverOptions {
        let kkt_tol = match self {
            Profile::Desk => 1e-6,
            Profile::Strict => 1e-9,
        };
        SolverOptions { kkt_tol, max_iter: RUNNER_MAX_ITER, ..SolverOptions::default() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub profile: Profile,
    pub x0: State,
    pub steps: usize,
    pub params: RobotParams,
    pub weights: Weights,
    pub constraints: ConstraintConfig,
    pub gains: MetricGains,
    pub disc: DiscretizationConfig,
    pub solver: SolverOptions,
    pub v_ref: f64,
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn pose(x: f64, y: f64, phi: f64) -> Pose {
    Pose { x, y, phi }
}

impl Scenario {
    /// Built-in scenario between two rest poses with `R = P = alpha I`.
    pub fn between(name: &str, start: (f64, f64, f64), target: (f64, f64, f64), alpha: f64, beta: f64) -> Result<Self> {
        let profile = Profile::Desk;
        let s = Self {
            name: name.to_string(),
            profile,
            x0: State::at_rest(start.0, start.1, start.2),
            steps: 40,
            params: RobotParams::default(),
            weights: Weights::from_alpha(alpha, beta, KineticForm::Body)?,
            constraints: profile.constraints(pose(target.0, target.1, target.2)),
            gains: MetricGains::default(),
            disc: DiscretizationConfig::default(),
            solver: profile.solver(),
            v_ref: DEFAULT_V_REF,
        };
        s.validate()?;
        Ok(s)
    }

    /// `(7, 1, pi/2)` to `(-7, -1, -pi/2)`.
    pub fn example_one(alpha: f64, beta: f64) -> Result<Self> {
        Self::between(&format!("example1_a{alpha}_b{beta}"), (7.0, 1.0, PI / 2.0), (-7.0, -1.0, -PI / 2.0), alpha, beta)
    }

    /// The three maneuvers with `alpha = beta = 10`.
    pub fn example_two() -> Result<Vec<Self>> {
        let legs = [
            ((7.0, 7.0, 0.0), (-7.0, -7.0, PI)),
            ((-7.0, 0.0, PI), (7.0, 0.0, 0.0)),
            ((-7.0, 0.0, PI / 4.0), (7.0, 0.0, 3.0 * PI / 4.0)),
        ];
        legs.iter()
            .enumerate()
            .map(|(i, (s, t))| Self::between(&format!("example2_{}", i + 1), *s, *t, 10.0, 10.0))
            .collect()
    }

    /// `(0, 8, -pi/2)` to `(0, -8, pi/2)`.
    pub fn example_three(alpha: f64, beta: f64) -> Result<Self> {
        Self::between(&format!("example3_a{alpha}_b{beta}"), (0.0, 8.0, -PI / 2.0), (0.0, -8.0, PI / 2.0), alpha, beta)
    }

    pub fn load(path: &Path, force_strict: bool) -> Result<Self> {
        let mut keys = Keys::parse(&read_file(path)?)?;
        let s = Self::from_keys(&mut keys, force_strict)?;
        keys.finish()?;
        Ok(s)
    }

    pub fn parse(text: &str, force_strict: bool) -> Result<Self> {
        let mut keys = Keys::parse(text)?;
        let s = Self::from_keys(&mut keys, force_strict)?;
        keys.finish()?;
        Ok(s)
    }

    /// Reads all scenario keys, leaving others for the caller.
    pub fn from_keys(k: &mut Keys, force_strict: bool) -> Result<Self> {
        let profile = match k.string("profile")?.as_deref() {
            _ if force_strict => Profile::Strict,
            None | Some("desk") => Profile::Desk,
            Some("strict") => Profile::Strict,
            Some(other) => {
                return Err(Error::key("profile", format!("expected \"desk\" or \"strict\", got \"{other}\"")))
            }
        };
        let name = k.string("name")?.unwrap_or_else(|| "scenario".into());
        if name.is_empty() || name.contains(['/', '\\']) {
            return Err(Error::key("name", "must be a non-empty file stem"));
        }

        let get = |k: &mut Keys, key: &str, d: f64| k.f64(key).map(|v| v.unwrap_or(d));
        let x0 = State {
            x: get(k, "start.x", 0.0)?,
            y: get(k, "start.y", 0.0)?,
            phi: get(k, "start.phi", 0.0)?,
            v_r: get(k, "start.v_r", 0.0)?,
            v_l: get(k, "start.v_l", 0.0)?,
            ..State::zero()
        };
        let need = |k: &mut Keys, key: &str| k.f64(key)?.ok_or_else(|| Error::key(key, "required"));
        let target = pose(need(k, "target.x")?, need(k, "target.y")?, need(k, "target.phi")?);
        let steps = k.usize("steps")?.unwrap_or(40);

        let d = RobotParams::default();
        let mat = |a: [f64; 4]| [[a[0], a[1]], [a[2], a[3]]];
        let params = RobotParams {
            r: get(k, "robot.r", d.r)?,
            b: get(k, "robot.b", d.b)?,
            m: k.array::<4>("robot.m")?.map(mat).unwrap_or(d.m),
            v: k.array::<4>("robot.v")?.map(mat).unwrap_or(d.v),
        };

        let alpha = get(k, "weights.alpha", 1.0)?;
        let ke_form = match k.string("weights.kinetic")?.as_deref() {
            None | Some("body") => KineticForm::Body,
            Some("wheel") => KineticForm::Wheel,
            Some(other) => {
                return Err(Error::key("weights.kinetic", format!("expected \"body\" or \"wheel\", got \"{other}\"")))
            }
        };
        let weights = Weights {
            r: k.array::<2>("weights.r")?.unwrap_or([alpha; 2]),
            p: k.array::<2>("weights.p")?.unwrap_or([alpha; 2]),
            beta: get(k, "weights.beta", 1.0)?,
            ke_form,
        };

        let mut c = profile.constraints(target);
        c.t_min = get(k, "constraints.t_min", c.t_min)?;
        c.t_max = get(k, "constraints.t_max", c.t_max)?;
        c.tau_min = get(k, "constraints.tau_min", c.tau_min)?;
        c.tau_max = get(k, "constraints.tau_max", c.tau_max)?;
        c.eps = get(k, "constraints.eps", c.eps)?;
        c.eps_phi = get(k, "constraints.eps_phi", c.eps_phi)?;
        c.eps_v = get(k, "constraints.eps_v", c.eps_v)?;
        c.wrap_angle = k.bool("constraints.wrap_angle")?.unwrap_or(c.wrap_angle);
        c.accel_bounds = k.array::<2>("constraints.accel_bounds")?;
        c.wheel_speed_bounds = k.array::<2>("constraints.wheel_speed_bounds")?;

        let gains = MetricGains { k_tau: get(k, "metrics.k_tau", 1.0)?, k_m: get(k, "metrics.k_m", 1.0)? };
        let dd = DiscretizationConfig::default();
        let disc = DiscretizationConfig::new(
            k.usize("discretization.ell_max")?.unwrap_or(dd.ell_max()),
            k.usize("discretization.oracle_substeps")?.unwrap_or(dd.oracle_substeps()),
        )?;

        let mut o = profile.solver();
        o.kkt_tol = get(k, "solver.kkt_tol", o.kkt_tol)?;
        o.max_iter = k.usize("solver.max_iter")?.unwrap_or(o.max_iter);
        o.merit_penalty_init = get(k, "solver.merit_penalty_init", o.merit_penalty_init)?;
        o.merit_penalty_growth = get(k, "solver.merit_penalty_growth", o.merit_penalty_growth)?;
        o.merit_penalty_max = get(k, "solver.merit_penalty_max", o.merit_penalty_max)?;
        o.ls_backtrack_factor = get(k, "solver.ls_backtrack_factor", o.ls_backtrack_factor)?;
        o.ls_max_steps = k.usize("solver.ls_max_steps")?.unwrap_or(o.ls_max_steps);
        o.ls_armijo = get(k, "solver.ls_armijo", o.ls_armijo)?;
        o.bfgs_damping_threshold = get(k, "solver.bfgs_damping_threshold", o.bfgs_damping_threshold)?;
        o.fd_check = k.bool("solver.fd_check")?.unwrap_or(o.fd_check);

        let s = Self {
            name,
            profile,
            x0,
            steps,
            params,
            weights,
            constraints: c,
            gains,
            disc,
            solver: o,
            v_ref: get(k, "guess.v_ref", DEFAULT_V_REF)?,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        self.problem()?;
        MetricGains::new(self.gains.k_tau, self.gains.k_m)?;
        self.solver.validate()?;
        if !(self.v_ref > 0.0 && self.v_ref.is_finite()) {
            return Err(Error::key("guess.v_ref", "must be > 0"));
        }
        Ok(())
    }

    pub fn problem(&self) -> Result<NlpProblem> {
        Ok(NlpProblem::new(self.x0, self.steps, self.params, self.weights, self.constraints, self.disc)?)
    }

    /// Same scenario with `R = P = alpha I` and time weight `beta`.
    pub fn with_alpha_beta(&self, alpha: f64, beta: f64) -> Result<Self> {
        let weights = Weights::from_alpha(alpha, beta, self.weights.ke_form)?;
        Ok(Self { weights, ..self.clone() })
    }

    /// `Some(alpha)` when the weights have the form `R = P = alpha I`.
    pub fn alpha(&self) -> Option<f64> {
        let w = &self.weights;
        let a = w.r[0];
        (w.r[1] == a && w.p == [a; 2]).then_some(a)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub alpha_values: Vec<f64>,
    pub beta_values: Vec<f64>,
    pub base: Scenario,
    pub workers: Option<usize>,
}

impl SweepSpec {
    pub fn new(alpha_values: Vec<f64>, beta_values: Vec<f64>, base: Scenario) -> Result<Self> {
        let s = Self { alpha_values, beta_values, base, workers: None };
        s.validate()?;
        Ok(s)
    }

    /// Weight grid of Example 3.
    pub fn example_three() -> Result<Self> {
        let grid = vec![0.0, 5.0, 10.0, 15.0, 20.0];
        let base = Scenario { name: "example3".into(), ..Scenario::example_three(1.0, 1.0)? };
        Self::new(grid.clone(), grid, base)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_file(path)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut keys = Keys::parse(text)?;
        let alpha_values = keys.list("sweep.alpha")?.ok_or_else(|| Error::key("sweep.alpha", "required"))?;
        let beta_values = keys.list("sweep.beta")?.ok_or_else(|| Error::key("sweep.beta", "required"))?;
        let workers = keys.usize("sweep.workers")?;
        let base = Scenario::from_keys(&mut keys, false)?;
        keys.finish()?;
        let s = Self { alpha_values, beta_values, base, workers };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        for (key, v) in [("sweep.alpha", &self.alpha_values), ("sweep.beta", &self.beta_values)] {
            if v.is_empty() {
                return Err(Error::key(key, "must not be empty"));
            }
            if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(Error::key(key, "values must be finite and >= 0"));
            }
        }
        if self.workers == Some(0) {
            return Err(Error::key("sweep.workers", "must be >= 1"));
        }
        if self.cells().is_empty() {
            return Err(Error::key("sweep", "grid holds only the rejected (0, 0) pair"));
        }
        Ok(())
    }

    /// Grid pairs in `(alpha, beta)` order, without `(0, 0)`.
    pub fn cells(&self) -> Vec<(f64, f64)> {
        self.alpha_values
            .iter()
            .flat_map(|&a| self.beta_values.iter().map(move |&b| (a, b)))
            .filter(|&(a, b)| !(a == 0.0 && b == 0.0))
            .collect()
    }

    pub fn rejected_cells(&self) -> usize {
        self.alpha_values.len() * self.beta_values.len() - self.cells().len()
    }
}
