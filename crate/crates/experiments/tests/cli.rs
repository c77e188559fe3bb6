use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SHORT: &str = r#"
name = "short"
steps = 10
start = { x = 0, y = 0, phi = 0 }
target = { x = 1, y = 0.5, phi = "pi/4" }
weights = { alpha = 2, beta = 1 }
"#;

fn ddtraj(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ddtraj")).args(args).output().expect("binary runs")
}

fn scenario(dir: &Path, file: &str, text: &str) -> PathBuf {
    let p = dir.join(file);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn solve_writes_deterministic_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let file = scenario(dir.path(), "short.toml", SHORT);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = ddtraj(&["solve", s(&file), "--out", s(out), "--log-iterations"]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["short_trajectory.csv", "short_summary.csv", "short_path.svg", "short_torque.svg", "short_iterations.csv"]
    {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let traj = fs::read_to_string(a.join("short_trajectory.csv")).unwrap();
    let lines: Vec<&str> = traj.lines().collect();
    assert_eq!(lines[0], "k,t,T_s,x,y,phi,theta_r,theta_l,v_r,v_l,u_r,u_l,tau_r,tau_l");
    assert_eq!(lines.len(), 1 + 11);
    assert!(lines.iter().skip(1).all(|l| l.split(',').count() == 14));
    let summary = fs::read_to_string(a.join("short_summary.csv")).unwrap();
    assert!(summary.lines().nth(1).unwrap().starts_with("2.0000000000000000e0,1.0000000000000000e0,converged,"));
}

#[test]
fn degenerate_scenario_takes_minimal_time() {
    let dir = tempfile::tempdir().unwrap();
    let text = "name = \"rest\"\nstart = { x = 1, y = 2, phi = 0.5 }\ntarget = { x = 1, y = 2, phi = 0.5 }\n";
    let file = scenario(dir.path(), "rest.toml", text);
    let o = ddtraj(&["solve", s(&file), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(0));
    let summary = fs::read_to_string(dir.path().join("rest_summary.csv")).unwrap();
    let cells: Vec<f64> =
        summary.lines().nth(1).unwrap().split(',').skip(3).take(2).map(|c| c.parse().unwrap()).collect();
    assert!(cells[0] >= 40.0 * 0.01 - 1e-12 && cells[1].abs() < 1e-9, "{cells:?}");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let capped = scenario(dir.path(), "capped.toml", &format!("{SHORT}solver.max_iter = 2\n"));
    let o = ddtraj(&["solve", s(&capped), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("max-iterations"));

    let typo = scenario(dir.path(), "typo.toml", &format!("{SHORT}wieghts.beta = 3\n"));
    let o = ddtraj(&["solve", s(&typo), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("wieghts.beta"));

    let bad = scenario(dir.path(), "bad.toml", &format!("{SHORT}robot.r = -0.1\n"));
    assert_eq!(ddtraj(&["check", s(&bad)]).status.code(), Some(1));
    assert_eq!(ddtraj(&["solve", s(&dir.path().join("missing.toml"))]).status.code(), Some(1));
}

#[test]
fn check_reports_each_test() {
    let dir = tempfile::tempdir().unwrap();
    let file = scenario(dir.path(), "short.toml", SHORT);
    let o = ddtraj(&["check", s(&file)]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 3, "{text}");

    let first = scenario(dir.path(), "first.toml", &format!("{SHORT}discretization.ell_max = 1\n"));
    let o = ddtraj(&["check", s(&first)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("INFO discretization-order"));
}

#[test]
fn sweep_rows_and_single_cell_consistency() {
    let dir = tempfile::tempdir().unwrap();
    let grid = scenario(dir.path(), "grid.toml", &format!("{SHORT}sweep.alpha = [0, 2]\nsweep.beta = [1, 0]\n"));
    let out = dir.path().join("grid");
    let o = ddtraj(&["sweep", s(&grid), "--out", s(&out), "--workers", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("short_sweep.csv")).unwrap();
    let keys: Vec<(String, String)> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').take(2).map(str::to_string).collect::<Vec<_>>())
        .map(|v| (v[0].clone(), v[1].clone()))
        .collect();
    // (0, 0) skipped, the rest in file order
    assert_eq!(keys.len(), 3);
    assert_eq!(keys[0].0, "0.0000000000000000e0");
    assert_eq!(keys[1].0, "2.0000000000000000e0");
    for f in [
        "short_normalized.csv",
        "short_tf_vs_beta.svg",
        "short_energy_vs_alpha.svg",
        "short_tf_surface.svg",
        "short_energy_surface.svg",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
    let norm = fs::read_to_string(out.join("short_normalized.csv")).unwrap();
    for l in norm.lines().skip(1) {
        for v in l.split(',').skip(2) {
            let v: f64 = v.parse().unwrap();
            assert!((0.0..=1.0).contains(&v));
        }
    }

    let single = scenario(dir.path(), "single.toml", &format!("{SHORT}sweep.alpha = [2]\nsweep.beta = [1]\n"));
    let o = ddtraj(&["sweep", s(&single), "--out", s(&dir.path().join("one"))]);
    assert_eq!(o.status.code(), Some(0));
    let plain = scenario(dir.path(), "plain.toml", SHORT);
    assert_eq!(ddtraj(&["solve", s(&plain), "--out", s(&dir.path().join("solo"))]).status.code(), Some(0));
    assert_eq!(
        fs::read_to_string(dir.path().join("one/short_sweep.csv")).unwrap(),
        fs::read_to_string(dir.path().join("solo/short_summary.csv")).unwrap()
    );
}
