//! Command-line front end.
//!
//! Exit codes: 0 success, 1 invalid input or I/O failure, 2 the solve did not
//! converge, 3 a self-check failed.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::check::run_checks;
use crate::error::{Error, Result};
use crate::runner::{
    iterations_csv, normalized, normalized_csv, run_sweep, solve_scenario, summary_csv, trajectory_csv, trends,
    SummaryRow,
};
use crate::scenario::{Scenario, SweepSpec};
use crate::svg;

pub const EXIT_OK: u8 = 0;
pub const EXIT_INVALID: u8 = 1;
pub const EXIT_NOT_CONVERGED: u8 = 2;
pub const EXIT_CHECK_FAILED: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "ddtraj", version, about = "Time-energy optimal trajectories for a differential-drive robot")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one scenario and write trajectory, summary and plots.
    Solve {
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Use the strict terminal tolerances and kkt_tol = 1e-9.
        #[arg(long)]
        strict_tolerances: bool,
        /// Also write the per-iteration solver log.
        #[arg(long)]
        log_iterations: bool,
    },
    /// Solve a grid of (alpha, beta) weights.
    Sweep {
        sweep: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Worker threads; defaults to `sweep.workers`, then the core count.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Run the discretization, gradient and round-trip self-checks.
    Check { scenario: PathBuf },
}

fn write(dir: &Path, file: &str, contents: &str) -> Result<()> {
    let path = dir.join(file);
    std::fs::write(&path, contents).map_err(|e| Error::io(path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn cmd_solve(path: &Path, out: &Path, strict: bool, log: bool) -> Result<u8> {
    let s = Scenario::load(path, strict)?;
    let r = solve_scenario(&s)?;
    create_dir(out)?;
    let name = &s.name;
    write(out, &format!("{name}_trajectory.csv"), &trajectory_csv(&r.trajectory, &s.params))?;
    write(out, &format!("{name}_summary.csv"), &summary_csv(&[SummaryRow::new(&s, &r)]))?;
    write(out, &format!("{name}_path.svg"), &svg::path_svg(&r.trajectory, &format!("{name}: path")))?;
    let torque = svg::torque_svg(&r.trajectory, &s.params, &s.constraints, &format!("{name}: wheel torques"));
    write(out, &format!("{name}_torque.svg"), &torque)?;
    if log {
        write(out, &format!("{name}_iterations.csv"), &iterations_csv(&r.log))?;
    }
    let m = r.metrics.expect("filled by solve_scenario");
    println!("scenario    {name}");
    println!("status      {}", r.status);
    println!("objective   {:.10}", r.objective);
    println!("t_f         {:.10} s", m.final_time);
    println!("energy      {:.10}", m.energy);
    println!("iterations  {}", r.iterations);
    println!("kkt         {:.3e}", r.kkt_residual);
    println!("violation   {:.3e}", r.max_constraint_violation);
    println!("wall time   {:.3} s", r.wall_time.as_secs_f64());
    if r.converged() {
        Ok(EXIT_OK)
    } else {
        eprintln!("solver did not converge: {}", r.status);
        Ok(EXIT_NOT_CONVERGED)
    }
}

fn cmd_sweep(path: &Path, out: &Path, workers: Option<usize>) -> Result<u8> {
    let spec = SweepSpec::load(path)?;
    if workers == Some(0) {
        return Err(Error::key("--workers", "must be >= 1"));
    }
    let workers =
        workers.or(spec.workers).unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    if spec.rejected_cells() > 0 {
        eprintln!("skipping the (0, 0) cell: an all-zero objective has no unique optimum");
    }
    let rows = run_sweep(&spec, workers);
    create_dir(out)?;
    let name = &spec.base.name;
    write(out, &format!("{name}_sweep.csv"), &summary_csv(&rows))?;
    write(out, &format!("{name}_normalized.csv"), &normalized_csv(&rows))?;

    let mut alphas = spec.alpha_values.clone();
    let mut betas = spec.beta_values.clone();
    alphas.sort_by(f64::total_cmp);
    betas.sort_by(f64::total_cmp);
    let ok = |a: f64, b: f64| rows.iter().find(|r| r.alpha == Some(a) && r.beta == b && r.converged());
    let time_lines: Vec<_> = alphas
        .iter()
        .map(|&a| (format!("alpha = {a}"), betas.iter().filter_map(|&b| ok(a, b).map(|r| (b, r.t_f))).collect()))
        .collect();
    let energy_lines: Vec<_> = betas
        .iter()
        .map(|&b| (format!("beta = {b}"), alphas.iter().filter_map(|&a| ok(a, b).map(|r| (a, r.energy))).collect()))
        .collect();
    write(out, &format!("{name}_tf_vs_beta.svg"), &svg::line_chart(&time_lines, "final time", "beta", "t_f (s)"))?;
    write(out, &format!("{name}_energy_vs_alpha.svg"), &svg::line_chart(&energy_lines, "energy", "alpha", "E"))?;

    let norm = normalized(&rows);
    let grid = |pick: fn(&(f64, f64, f64, f64)) -> f64| -> Vec<Vec<Option<f64>>> {
        alphas
            .iter()
            .map(|&a| betas.iter().map(|&b| norm.iter().find(|n| n.0 == a && n.1 == b).map(pick)).collect())
            .collect()
    };
    let tf_map = svg::heat_map(&alphas, &betas, &grid(|n| n.2), "normalized final time", "alpha", "beta");
    let e_map = svg::heat_map(&alphas, &betas, &grid(|n| n.3), "normalized energy", "alpha", "beta");
    write(out, &format!("{name}_tf_surface.svg"), &tf_map)?;
    write(out, &format!("{name}_energy_surface.svg"), &e_map)?;

    let converged = rows.iter().filter(|r| r.converged()).count();
    let t = trends(&spec, &rows);
    println!("cells       {} attempted, {converged} converged", rows.len());
    println!("t_f trend   {}/{} adjacent pairs non-increasing in beta", t.time_ok, t.time_pairs);
    println!("E trend     {}/{} adjacent pairs non-increasing in alpha", t.energy_ok, t.energy_pairs);
    for r in rows.iter().filter(|r| !r.converged()) {
        eprintln!("cell alpha={:?} beta={}: {}", r.alpha, r.beta, r.status);
    }
    Ok(EXIT_OK)
}

fn cmd_check(path: &Path) -> Result<u8> {
    let s = Scenario::load(path, false)?;
    let mut failed = false;
    for c in run_checks(&s)? {
        let tag = match (c.passed, c.informational) {
            (_, true) => "INFO",
            (true, false) => "PASS",
            (false, false) => "FAIL",
        };
        failed |= !c.passed && !c.informational;
        println!("{tag} {:<22} {}", c.name, c.detail);
    }
    Ok(if failed { EXIT_CHECK_FAILED } else { EXIT_OK })
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> u8 {
    let res = match cli.command {
        Command::Solve { scenario, out, strict_tolerances, log_iterations } => {
            cmd_solve(&scenario, &out, strict_tolerances, log_iterations)
        }
        Command::Sweep { sweep, out, workers } => cmd_sweep(&sweep, &out, workers),
        Command::Check { scenario } => cmd_check(&scenario),
    };
    res.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        EXIT_INVALID
    })
}
