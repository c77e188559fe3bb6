//! Solving scenarios and sweeps, and their CSV forms.
//!
//! All floats are written with 17 significant digits, so identical solves
//! give byte-identical files.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use ddtraj_core::robot::torque_from_accel;
use ddtraj_core::solver::{make_initial_guess, solve, IterationRecord};
use ddtraj_core::{RobotParams, SolveReport, Trajectory};

use crate::error::Result;
use crate::scenario::{Scenario, SweepSpec};

/// Runs the initial guess and the solver, and fills in the metrics.
pub fn solve_scenario(s: &Scenario) -> Result<SolveReport> {
    let prob = s.problem()?;
    let guess = make_initial_guess(&prob, s.v_ref)?;
    Ok(solve(&prob, &guess.controls, &s.solver)?.with_metrics(&s.gains, &prob))
}

pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub const SUMMARY_HEADER: &str = "alpha,beta,status,t_f,energy,objective,iterations";

/// One line of a summary or sweep table.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    /// Empty when the weights are not of the form `R = P = alpha I`.
    pub alpha: Option<f64>,
    pub beta: f64,
    /// Solver status, or `error` when the solve could not start.
    pub status: String,
    pub t_f: f64,
    pub energy: f64,
    pub objective: f64,
    pub iterations: usize,
}

impl SummaryRow {
    pub fn new(s: &Scenario, r: &SolveReport) -> Self {
        let m = r.metrics.expect("metrics are filled by solve_scenario");
        Self {
            alpha: s.alpha(),
            beta: s.weights.beta,
            status: r.status.to_string(),
            t_f: m.final_time,
            energy: m.energy,
            objective: r.objective,
            iterations: r.iterations,
        }
    }

    fn error(s: &Scenario) -> Self {
        Self {
            alpha: s.alpha(),
            beta: s.weights.beta,
            status: "error".into(),
            t_f: f64::NAN,
            energy: f64::NAN,
            objective: f64::NAN,
            iterations: 0,
        }
    }

    pub fn converged(&self) -> bool {
        self.status == "converged"
    }

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.alpha.map(num).unwrap_or_default(),
            num(self.beta),
            self.status,
            num(self.t_f),
            num(self.energy),
            num(self.objective),
            self.iterations
        )
    }
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = format!("{SUMMARY_HEADER}\n");
    for r in rows {
        out.push_str(&r.to_csv());
        out.push('\n');
    }
    out
}

pub const TRAJECTORY_HEADER: &str = "k,t,T_s,x,y,phi,theta_r,theta_l,v_r,v_l,u_r,u_l,tau_r,tau_l";

/// One row per state `k = 0..=N`; `t` is the time at which state `k` is
/// reached. The control columns of row `k` hold the step leaving it, so the
/// terminal row leaves them empty.
pub fn trajectory_csv(traj: &Trajectory, params: &RobotParams) -> String {
    let mut out = format!("{TRAJECTORY_HEADER}\n");
    let mut t = 0.0;
    for (k, s) in traj.states.iter().enumerate() {
        let mut cells = vec![k.to_string(), num(t)];
        let control = traj.controls.get(k);
        cells.push(control.map(|c| num(c.t_s)).unwrap_or_default());
        cells.extend(s.to_array().map(num));
        match control {
            Some(c) => {
                let tau = torque_from_accel(&c.accel(), &s.wheel_velocity(), params);
                cells.extend([c.u_r, c.u_l, tau.tau_r, tau.tau_l].map(num));
                t += c.t_s;
            }
            None => cells.extend(std::iter::repeat_n(String::new(), 4)),
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn iterations_csv(log: &[IterationRecord]) -> String {
    let mut out = String::from("iter,objective,merit,step_length,max_violation\n");
    for r in log {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.iter,
            num(r.objective),
            num(r.merit),
            num(r.step_length),
            num(r.max_violation)
        ));
    }
    out
}

/// Solves every grid cell on up to `workers` threads. Rows come back in
/// `(alpha, beta)` order whatever the completion order.
pub fn run_sweep(spec: &SweepSpec, workers: usize) -> Vec<SummaryRow> {
    let cells = spec.cells();
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<SummaryRow>>> = Mutex::new(vec![None; cells.len()]);
    std::thread::scope(|scope| {
        for _ in 0..workers.clamp(1, cells.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(a, b)) = cells.get(i) else { break };
                let row = match spec.base.with_alpha_beta(a, b) {
                    Ok(s) => match solve_scenario(&s) {
                        Ok(r) => SummaryRow::new(&s, &r),
                        Err(_) => SummaryRow::error(&s),
                    },
                    Err(_) => SummaryRow::error(&spec.base),
                };
                slots.lock().expect("no worker panics while holding the lock")[i] = Some(row);
            });
        }
    });
    slots.into_inner().expect("workers joined").into_iter().map(|r| r.expect("every cell solved")).collect()
}

/// Adjacent-pair counts for the expected monotone trends.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Trends {
    /// Pairs along fixed `alpha` with `t_f` non-increasing in `beta`.
    pub time_ok: usize,
    pub time_pairs: usize,
    /// Pairs along fixed `beta` with energy non-increasing in `alpha`.
    pub energy_ok: usize,
    pub energy_pairs: usize,
}

impl Trends {
    pub fn time_fraction(&self) -> f64 {
        self.time_ok as f64 / self.time_pairs as f64
    }

    pub fn energy_fraction(&self) -> f64 {
        self.energy_ok as f64 / self.energy_pairs as f64
    }
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut v = v.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

fn lookup(rows: &[SummaryRow], a: f64, b: f64) -> Option<&SummaryRow> {
    rows.iter().find(|r| r.alpha == Some(a) && r.beta == b && r.converged())
}

/// Counts only lines with at least four converged cells; pairs are adjacent
/// converged cells along the line.
pub fn trends(spec: &SweepSpec, rows: &[SummaryRow]) -> Trends {
    let (alphas, betas) = (sorted(&spec.alpha_values), sorted(&spec.beta_values));
    let mut t = Trends::default();
    let count = |line: Vec<f64>, ok: &mut usize, pairs: &mut usize| {
        if line.len() >= 4 {
            for w in line.windows(2) {
                *pairs += 1;
                *ok += usize::from(w[1] <= w[0]);
            }
        }
    };
    for &a in &alphas {
        let line = betas.iter().filter_map(|&b| lookup(rows, a, b)).map(|r| r.t_f).collect();
        count(line, &mut t.time_ok, &mut t.time_pairs);
    }
    for &b in &betas {
        let line = alphas.iter().filter_map(|&a| lookup(rows, a, b)).map(|r| r.energy).collect();
        count(line, &mut t.energy_ok, &mut t.energy_pairs);
    }
    t
}

/// Min-max normalized `(alpha, beta, t_f, energy)` over converged cells.
pub fn normalized(rows: &[SummaryRow]) -> Vec<(f64, f64, f64, f64)> {
    let ok: Vec<&SummaryRow> = rows.iter().filter(|r| r.converged() && r.alpha.is_some()).collect();
    let scale = |f: fn(&SummaryRow) -> f64| {
        let lo = ok.iter().map(|r| f(r)).fold(f64::INFINITY, f64::min);
        let hi = ok.iter().map(|r| f(r)).fold(f64::NEG_INFINITY, f64::max);
        move |v: f64| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 }
    };
    let (nt, ne) = (scale(|r| r.t_f), scale(|r| r.energy));
    ok.iter().map(|r| (r.alpha.unwrap_or_default(), r.beta, nt(r.t_f), ne(r.energy))).collect()
}

pub fn normalized_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("alpha,beta,t_f_normalized,energy_normalized\n");
    for (a, b, t, e) in normalized(rows) {
        out.push_str(&format!("{},{},{},{}\n", num(a), num(b), num(t), num(e)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(a: f64, b: f64, t_f: f64, energy: f64, status: &str) -> SummaryRow {
        SummaryRow { alpha: Some(a), beta: b, status: status.into(), t_f, energy, objective: 0.0, iterations: 1 }
    }

    #[test]
    fn trend_counts_skip_short_lines() {
        let spec =
            SweepSpec::new(vec![1.0, 2.0], vec![1.0, 2.0, 3.0, 4.0], Scenario::example_one(1.0, 1.0).unwrap()).unwrap();
        let mut rows = vec![];
        for a in [1.0, 2.0] {
            for (i, b) in [1.0, 2.0, 3.0, 4.0].into_iter().enumerate() {
                rows.push(row(a, b, 10.0 - i as f64 + if i == 3 { 5.0 } else { 0.0 }, 1.0 / a, "converged"));
            }
        }
        let t = trends(&spec, &rows);
        // two alpha lines of four cells, each with one rising pair
        assert_eq!((t.time_ok, t.time_pairs), (4, 6));
        // beta lines hold only two cells
        assert_eq!(t.energy_pairs, 0);
        rows[1].status = "max-iterations".into();
        assert_eq!(trends(&spec, &rows).time_pairs, 3);
    }

    #[test]
    fn normalization_spans_unit_interval() {
        let rows = vec![
            row(1.0, 1.0, 3.0, 10.0, "converged"),
            row(1.0, 2.0, 5.0, 30.0, "converged"),
            row(2.0, 1.0, 4.0, 20.0, "converged"),
            row(2.0, 2.0, 99.0, 99.0, "diverged"),
        ];
        let n = normalized(&rows);
        assert_eq!(n.len(), 3);
        assert_eq!(n[0], (1.0, 1.0, 0.0, 0.0));
        assert_eq!(n[1], (1.0, 2.0, 1.0, 1.0));
        assert_eq!(n[2].2, 0.5);
    }

    #[test]
    fn csv_formats() {
        let r = row(5.0, 0.5, 1.0 / 3.0, 2.0, "converged");
        assert_eq!(r.to_csv(), "5.0000000000000000e0,5.0000000000000000e-1,converged,3.3333333333333331e-1,2.0000000000000000e0,0.0000000000000000e0,1");
        let r = SummaryRow { alpha: None, ..r };
        assert!(r.to_csv().starts_with(",5.0"));
    }
}
