use std::f64::consts::PI;

use approx::assert_relative_eq;
use ddtraj_core::discretization::DiscretizationConfig;
use ddtraj_core::problem::{ConstraintConfig, KineticForm, MetricGains, NlpProblem, Pose, Weights};
use ddtraj_core::robot::{body_from_wheel, RobotParams, State};
use ddtraj_core::scalar::wrap_angle;
use ddtraj_core::solver::{make_initial_guess, solve, SolveReport, SolverOptions, DEFAULT_V_REF};

fn example_one(alpha: f64, beta: f64) -> NlpProblem<f64> {
    NlpProblem::new(
        State::at_rest(7.0, 1.0, PI / 2.0),
        40,
        RobotParams::default(),
        Weights::from_alpha(alpha, beta, KineticForm::Body).unwrap(),
        ConstraintConfig::desk(Pose { x: -7.0, y: -1.0, phi: -PI / 2.0 }),
        DiscretizationConfig::default(),
    )
    .unwrap()
}

fn opts() -> SolverOptions {
    SolverOptions { kkt_tol: 1e-6, max_iter: 5000, ..Default::default() }
}

fn run(prob: &NlpProblem<f64>) -> SolveReport<f64> {
    let guess = make_initial_guess(prob, DEFAULT_V_REF).unwrap();
    solve(prob, &guess.controls, &opts()).unwrap().with_metrics(&MetricGains::default(), prob)
}

#[test]
fn guess_for_example_one() {
    let prob = example_one(20.0, 20.0);
    let g = make_initial_guess(&prob, DEFAULT_V_REF).unwrap();
    assert_relative_eq!(g.straight_line_distance, 200f64.sqrt(), epsilon = 1e-12);
    assert!(g.controls.iter().all(|c| c.t_s >= 0.01 && c.t_s <= 2.0));
    assert!(g.time_estimate >= 2.0 * g.straight_line_distance / DEFAULT_V_REF);
}

#[test]
fn example_one_converges_onto_the_target() {
    let prob = example_one(20.0, 20.0);
    let r = run(&prob);
    assert!(r.converged(), "{}", r.status);
    assert!(r.kkt_residual <= 1e-6 && r.max_constraint_violation <= 1e-6);
    let c = &prob.constraints;
    let s = r.trajectory.terminal();
    let slack = 1e-6;
    assert!((s.x - c.target.x).abs() <= c.eps + slack);
    assert!((s.y - c.target.y).abs() <= c.eps + slack);
    assert!(wrap_angle(s.phi - c.target.phi).abs() <= c.eps_phi + slack);
    let b = body_from_wheel(&s.wheel_velocity(), &prob.params);
    assert!(b.v.abs() <= c.eps_v + slack && b.omega.abs() <= c.eps_v + slack);
    assert!(r.controls.iter().all(|u| u.t_s >= c.t_min && u.t_s <= c.t_max));
    // merit is non-increasing across accepted iterations
    assert!(r.log.iter().all(|l| l.merit <= l.merit_start));
    assert_eq!(r.log.len(), r.iterations);
}

#[test]
fn pure_energy_stretches_every_period() {
    let r = run(&example_one(20.0, 0.0));
    assert!(r.converged());
    let m = r.metrics.unwrap();
    assert_relative_eq!(m.final_time, 80.0, epsilon = 1e-6);
}

#[test]
fn repeated_solves_are_bit_identical() {
    let prob = example_one(20.0, 0.0);
    let (a, b) = (run(&prob), run(&prob));
    assert_eq!(a.controls, b.controls);
    assert_eq!(a.trajectory, b.trajectory);
    assert_eq!(a.objective.to_bits(), b.objective.to_bits());
    assert_eq!(a.log, b.log);
}

#[test]
fn scaling_the_weights_scales_the_optimum() {
    let prob = example_one(20.0, 20.0);
    let guess = make_initial_guess(&prob, DEFAULT_V_REF).unwrap();
    let a = solve(&prob, &guess.controls, &opts()).unwrap();
    let b = solve(&prob.with_scaled_weights(10.0), &guess.controls, &opts()).unwrap();
    assert!(a.converged() && b.converged());
    assert_relative_eq!(b.objective, 10.0 * a.objective, max_relative = 1e-4);
    for (x, y) in a.trajectory.states.iter().zip(&b.trajectory.states) {
        for (p, q) in x.to_array().iter().zip(y.to_array()) {
            assert!((p - q).abs() <= 1e-3 * p.abs().max(1.0), "{p} vs {q}");
        }
    }
}
