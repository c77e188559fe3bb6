use std::f64::consts::PI;

use approx::assert_relative_eq;
use ddtraj_core::discretization::{oracle_step, propagate, taylor_step, Control, DiscretizationConfig};
use ddtraj_core::robot::{RobotParams, State};
use proptest::prelude::*;

fn state() -> impl Strategy<Value = State<f64>> {
    (prop::array::uniform5(-10.0f64..10.0), -5.0f64..5.0, -5.0f64..5.0).prop_map(|(p, v_r, v_l)| State {
        x: p[0],
        y: p[1],
        phi: p[2],
        theta_r: p[3],
        theta_l: p[4],
        v_r,
        v_l,
    })
}

fn max_diff(a: &State<f64>, b: &State<f64>) -> f64 {
    a.to_array().iter().zip(b.to_array()).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

proptest! {
    #[test]
    fn halving_the_period_cuts_local_error_eightfold(s in state(), ur in -2.0f64..2.0, ul in -2.0f64..2.0) {
        let (p, cfg) = (RobotParams::default(), DiscretizationConfig::default());
        let err = |t: f64| {
            let c = Control::new(ur, ul, t);
            max_diff(&taylor_step(&s, &c, &p, &cfg), &oracle_step(&s, &c, &p, &cfg))
        };
        let (e1, e2) = (err(0.1), err(0.05));
        // a step from an exactly integrable state can be exact at both lengths
        prop_assume!(e1 > 1e-13);
        prop_assert!(e1 / e2 >= 6.0, "ratio {}", e1 / e2);
    }

    #[test]
    fn step_commutes_with_planar_motions(s in state(), ur in -2.0f64..2.0, ul in -2.0f64..2.0,
                                         t in 0.01f64..0.5, dx in -50.0f64..50.0, dy in -50.0f64..50.0, rot in -PI..PI) {
        let (p, cfg) = (RobotParams::default(), DiscretizationConfig::default());
        let c = Control::new(ur, ul, t);
        let base = taylor_step(&s, &c, &p, &cfg);
        let (sn, cs) = rot.sin_cos();
        let moved = State { x: cs * s.x - sn * s.y + dx, y: sn * s.x + cs * s.y + dy, phi: s.phi + rot, ..s };
        let out = taylor_step(&moved, &c, &p, &cfg);
        prop_assert!((out.x - (cs * base.x - sn * base.y + dx)).abs() < 1e-9);
        prop_assert!((out.y - (sn * base.x + cs * base.y + dy)).abs() < 1e-9);
        prop_assert!((out.phi - (base.phi + rot)).abs() < 1e-12);
    }

    #[test]
    fn wheel_velocities_integrate_exactly(s in state(), ur in -2.0f64..2.0, ul in -2.0f64..2.0, t in 0.0f64..2.0) {
        let out = taylor_step(&s, &Control::new(ur, ul, t), &RobotParams::default(), &DiscretizationConfig::default());
        prop_assert!((out.v_r - (s.v_r + ur * t)).abs() < 1e-12);
        prop_assert!((out.theta_l - (s.theta_l + s.v_l * t + 0.5 * ul * t * t)).abs() < 1e-10);
    }
}

#[test]
fn higher_orders_shrink_the_error() {
    let p = RobotParams::default();
    let s = State { x: 1.0, y: -2.0, phi: 0.4, theta_r: 0.0, theta_l: 0.0, v_r: 3.0, v_l: -1.0 };
    let c = Control::new(1.5, -0.5, 0.2);
    let oracle = oracle_step(&s, &c, &p, &DiscretizationConfig::default());
    let errs: Vec<f64> = (1..=5)
        .map(|ell| max_diff(&taylor_step(&s, &c, &p, &DiscretizationConfig::new(ell, 64).unwrap()), &oracle))
        .collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
}

#[test]
fn single_and_double_precision_agree() {
    let controls: Vec<Control<f64>> = (0..20).map(|k| Control::new((k as f64 * 0.3).sin(), 0.5, 0.1)).collect();
    let cfg = DiscretizationConfig::default();
    let p = RobotParams::default();
    let s0 = State::at_rest(1.0, 2.0, 0.3);
    let d = propagate(&s0, &controls, &p, &cfg).unwrap();
    let c32: Vec<Control<f32>> =
        controls.iter().map(|c| Control::new(c.u_r as f32, c.u_l as f32, c.t_s as f32)).collect();
    let f = propagate(&s0.cast::<f32>(), &c32, &p.cast::<f32>(), &cfg).unwrap();
    for (a, b) in d.terminal().to_array().iter().zip(f.terminal().to_array()) {
        assert_relative_eq!(*a, b as f64, epsilon = 1e-4, max_relative = 1e-5);
    }
}
