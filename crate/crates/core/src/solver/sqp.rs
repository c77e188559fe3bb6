//! Dense SQP with damped BFGS, an l1 exact-penalty merit function, Armijo
//! backtracking, and a second-order correction against the Maratos effect.

use crate::error::Error;
use crate::linalg::{axpy, cholesky, dot, norm_inf, Mat};
use crate::scalar::Scalar;
use crate::solver::qp::{solve_qp, QpError, QpProblem, QpSolution};

/// Values and first derivatives of an NLP at one point.
#[derive(Clone, Debug)]
pub struct NlpEval<T> {
    pub objective: T,
    pub gradient: Vec<T>,
    /// General constraints `c(x) <= 0`.
    pub constraints: Vec<T>,
    /// `dc/dx`, one row per constraint.
    pub jacobian: Mat<T>,
}

/// A smooth NLP `min f(x)  s.t.  c(x) <= 0,  lower <= x <= upper`.
pub trait Nlp<T: Scalar> {
    fn num_vars(&self) -> usize;
    fn num_constraints(&self) -> usize;
    /// Simple bounds; use infinities for free variables.
    fn bounds(&self) -> (Vec<T>, Vec<T>);
    /// Objective and constraint values.
    fn values(&self, x: &[T]) -> Result<(T, Vec<T>), Error>;
    fn derivatives(&self, x: &[T]) -> Result<NlpEval<T>, Error>;
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub kkt_tol: f64,
    pub max_iter: usize,
    /// Initial l1 penalty, relative to the objective scale.
    pub merit_penalty_init: f64,
    pub merit_penalty_growth: f64,
    /// Penalty cap, relative to the objective scale.
    pub merit_penalty_max: f64,
    pub ls_backtrack_factor: f64,
    pub ls_max_steps: usize,
    /// Armijo sufficient-decrease constant.
    pub ls_armijo: f64,
    /// Powell damping threshold on `s'y / s'Hs`.
    pub bfgs_damping_threshold: f64,
    /// Compare analytic derivatives against central differences at the start.
    pub fd_check: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            kkt_tol: 1e-9,
            max_iter: 500,
            merit_penalty_init: 1.0,
            merit_penalty_growth: 2.0,
            merit_penalty_max: 1e10,
            ls_backtrack_factor: 0.5,
            ls_max_steps: 40,
            ls_armijo: 1e-4,
            bfgs_damping_threshold: 0.2,
            fd_check: false,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<(), Error> {
        let bad = |m: &str| Err(Error::InvalidParams(m.into()));
        if !(self.kkt_tol > 0.0) {
            return bad("kkt_tol must be > 0");
        }
        if self.max_iter == 0 {
            return bad("max_iter must be >= 1");
        }
        if !(self.ls_backtrack_factor > 0.0 && self.ls_backtrack_factor < 1.0) {
            return bad("ls_backtrack_factor must lie in (0, 1)");
        }
        if !(self.merit_penalty_init > 0.0) || !(self.merit_penalty_growth > 1.0) {
            return bad("merit penalty must start > 0 and grow by a factor > 1");
        }
        if !(self.bfgs_damping_threshold > 0.0 && self.bfgs_damping_threshold < 1.0) {
            return bad("bfgs_damping_threshold must lie in (0, 1)");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    InfeasibleStall,
    LineSearchFailure,
    Diverged,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::MaxIterations => "max-iterations",
            SolveStatus::InfeasibleStall => "infeasible-stall",
            SolveStatus::LineSearchFailure => "line-search-failure",
            SolveStatus::Diverged => "diverged",
        }
    }
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One accepted SQP iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub objective: f64,
    /// Merit at the start of the iteration, with the penalty used for the step.
    pub merit_start: f64,
    /// Merit at the accepted point, same penalty.
    pub merit: f64,
    pub step_length: f64,
    pub max_violation: f64,
    pub kkt_residual: f64,
    pub penalty: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradientCheck {
    /// Worst relative error over objective-gradient and Jacobian entries
    /// whose magnitude exceeds 1e-8.
    pub max_rel_error: f64,
}

#[derive(Clone, Debug)]
pub struct SqpResult<T> {
    pub status: SolveStatus,
    pub x: Vec<T>,
    pub objective: T,
    pub constraints: Vec<T>,
    /// Multipliers of the general constraints from the last QP.
    pub lambda: Vec<T>,
    pub kkt_residual: f64,
    pub max_violation: f64,
    pub iterations: usize,
    pub log: Vec<IterationRecord>,
    pub gradient_check: Option<GradientCheck>,
}

struct Kkt {
    residual: f64,
    violation: f64,
}

fn max_violation<T: Scalar>(c: &[T]) -> T {
    c.iter().fold(T::zero(), |m, &v| m.max(v))
}

/// First-order optimality measure at `x` for multipliers from the QP solved
/// there.
///
/// `residual = max(stationarity, complementarity) / scale` where
/// stationarity is `|grad f + J' lambda - mu_lower + mu_upper|_inf`,
/// complementarity is the largest `|multiplier * slack|` over general rows and
/// finite bounds, and `scale` is the objective-gradient magnitude at the
/// starting point. `violation = max(0, max_i c_i(x))`.
fn kkt_measure<T: Scalar>(
    ev: &NlpEval<T>,
    x: &[T],
    lb: &[T],
    ub: &[T],
    qp: &QpSolution<T>,
    lambda: &[T],
    scale: T,
) -> Kkt {
    let n = x.len();
    let mut grad = ev.gradient.clone();
    let jtl = ev.jacobian.tr_mul_vec(lambda);
    for j in 0..n {
        grad[j] = grad[j] + jtl[j] - qp.mu_lower[j] + qp.mu_upper[j];
    }
    let stat = norm_inf(&grad);
    let mut comp = T::zero();
    for (l, c) in lambda.iter().zip(&ev.constraints) {
        comp = comp.max((*l * *c).abs());
    }
    for j in 0..n {
        if lb[j].is_finite() {
            comp = comp.max((qp.mu_lower[j] * (x[j] - lb[j])).abs());
        }
        if ub[j].is_finite() {
            comp = comp.max((qp.mu_upper[j] * (ub[j] - x[j])).abs());
        }
    }
    Kkt { residual: (stat.max(comp) / scale).to_f64_lossy(), violation: max_violation(&ev.constraints).to_f64_lossy() }
}

struct Step<T> {
    d: Vec<T>,
    qp: QpSolution<T>,
    lambda: Vec<T>,
    elastic: bool,
}

fn solve_subproblem<T: Scalar>(
    h: &Mat<T>,
    ev: &NlpEval<T>,
    dlo: &[T],
    dup: &[T],
    rho: &[T],
    scale: T,
) -> Result<Step<T>, QpError> {
    let n = dlo.len();
    let rhs: Vec<T> = ev.constraints.iter().map(|&c| -c).collect();
    let plain =
        solve_qp(&QpProblem { hessian: h, gradient: &ev.gradient, a: &ev.jacobian, b: &rhs, lower: dlo, upper: dup });
    match plain {
        Ok(qp) => {
            let lambda = qp.lambda.clone();
            return Ok(Step { d: qp.x.clone(), qp, lambda, elastic: false });
        }
        Err(QpError::Infeasible) | Err(QpError::IterationLimit) => {}
        Err(e) => return Err(e),
    }

    // elastic mode: one nonnegative slack per currently violated constraint
    let violated: Vec<usize> = (0..ev.constraints.len()).filter(|&i| ev.constraints[i] > T::zero()).collect();
    let ne = n + violated.len();
    let mut he = Mat::zeros(ne, ne);
    for i in 0..n {
        for j in 0..n {
            he[(i, j)] = h[(i, j)];
        }
    }
    for (k, &i) in violated.iter().enumerate() {
        he[(n + k, n + k)] = (rho[i] * T::of(1e-4)).max(scale * T::of(1e-8));
    }
    let mut ge = ev.gradient.clone();
    ge.extend(violated.iter().map(|&i| rho[i]));
    let m = ev.constraints.len();
    let mut ae = Mat::zeros(m, ne);
    for i in 0..m {
        ae.row_mut(i)[..n].copy_from_slice(ev.jacobian.row(i));
    }
    for (k, &i) in violated.iter().enumerate() {
        ae[(i, n + k)] = -T::one();
    }
    let mut lo = dlo.to_vec();
    lo.extend(std::iter::repeat_n(T::zero(), violated.len()));
    let mut up = dup.to_vec();
    up.extend(std::iter::repeat_n(T::infinity(), violated.len()));
    let qp = solve_qp(&QpProblem { hessian: &he, gradient: &ge, a: &ae, b: &rhs, lower: &lo, upper: &up })?;
    let d = qp.x[..n].to_vec();
    let lambda = qp.lambda.clone();
    let qp = QpSolution {
        x: d.clone(),
        lambda: qp.lambda,
        mu_lower: qp.mu_lower[..n].to_vec(),
        mu_upper: qp.mu_upper[..n].to_vec(),
        objective: qp.objective,
        iterations: qp.iterations,
    };
    Ok(Step { d, qp, lambda, elastic: true })
}

/// `sum_i rho_i max(0, c_i)`.
fn weighted_violation<T: Scalar>(c: &[T], rho: &[T]) -> T {
    c.iter().zip(rho).fold(T::zero(), |acc, (&v, &r)| acc + r * v.max(T::zero()))
}

/// l1 merit `f + sum_i rho_i max(0, c_i)` and the constraint values.
fn merit<T: Scalar>(nlp: &impl Nlp<T>, x: &[T], rho: &[T]) -> Option<(T, Vec<T>)> {
    let (f, c) = nlp.values(x).ok()?;
    let m = f + weighted_violation(&c, rho);
    m.is_finite().then_some((m, c))
}

fn clamp_into<T: Scalar>(x: &mut [T], lb: &[T], ub: &[T]) {
    for j in 0..x.len() {
        x[j] = x[j].max(lb[j]).min(ub[j]);
    }
}

fn gradient_check<T: Scalar>(nlp: &impl Nlp<T>, x: &[T], ev: &NlpEval<T>) -> GradientCheck {
    let mut worst = 0.0f64;
    let mut xp = x.to_vec();
    for j in 0..x.len() {
        let h = T::of(1e-6) * (T::one() + x[j].abs());
        xp[j] = x[j] + h;
        let plus = nlp.values(&xp);
        xp[j] = x[j] - h;
        let minus = nlp.values(&xp);
        xp[j] = x[j];
        let (Ok((fp, cp)), Ok((fm, cm))) = (plus, minus) else { continue };
        let two_h = h + h;
        let mut cmp = |analytic: T, numeric: T| {
            let a = analytic.to_f64_lossy();
            let n = numeric.to_f64_lossy();
            if a.abs() > 1e-8 {
                worst = worst.max((a - n).abs() / a.abs());
            }
        };
        cmp(ev.gradient[j], (fp - fm) / two_h);
        for i in 0..cp.len() {
            cmp(ev.jacobian[(i, j)], (cp[i] - cm[i]) / two_h);
        }
    }
    GradientCheck { max_rel_error: worst }
}

/// Powell-damped BFGS update of `h` in place.
fn bfgs_update<T: Scalar>(h: &mut Mat<T>, s: &[T], y: &[T], damping: T) {
    let hs = h.mul_vec(s);
    let shs = dot(s, &hs);
    if !(shs > T::zero()) {
        return;
    }
    let mut y = y.to_vec();
    let mut sy = dot(s, &y);
    if sy < damping * shs {
        let theta = (T::one() - damping) * shs / (shs - sy);
        for j in 0..y.len() {
            y[j] = theta * y[j] + (T::one() - theta) * hs[j];
        }
        sy = dot(s, &y);
    }
    if !(sy > T::zero()) {
        return;
    }
    let n = s.len();
    for i in 0..n {
        for j in 0..n {
            h[(i, j)] = h[(i, j)] - hs[i] * hs[j] / shs + y[i] * y[j] / sy;
        }
    }
}

/// Minimizes `nlp` from `x0`. Deterministic for identical inputs.
///
/// The returned status is [`SolveStatus::Converged`] only when
/// `kkt_residual <= kkt_tol` and `max_violation <= kkt_tol` hold at the
/// returned point (see `kkt_measure` for the exact definition). Simple bounds
/// hold at every iterate.
pub fn minimize<T: Scalar>(nlp: &impl Nlp<T>, x0: &[T], opts: &SolverOptions) -> SqpResult<T> {
    let n = nlp.num_vars();
    let m = nlp.num_constraints();
    assert_eq!(x0.len(), n, "initial point has wrong dimension");
    let (lb, ub) = nlp.bounds();
    let mut x = x0.to_vec();
    clamp_into(&mut x, &lb, &ub);

    let fail = |x: Vec<T>, status| SqpResult {
        status,
        x,
        objective: T::nan(),
        constraints: vec![T::nan(); m],
        lambda: vec![T::zero(); m],
        kkt_residual: f64::INFINITY,
        max_violation: f64::INFINITY,
        iterations: 0,
        log: Vec::new(),
        gradient_check: None,
    };

    let mut ev = match nlp.derivatives(&x) {
        Ok(ev) => ev,
        Err(_) => return fail(x, SolveStatus::Diverged),
    };
    let check = opts.fd_check.then(|| gradient_check(nlp, &x, &ev));

    let g0 = norm_inf(&ev.gradient);
    let scale = if g0 > T::zero() && g0.is_finite() { g0 } else { T::one() };
    let tol = opts.kkt_tol;
    let damping = T::of(opts.bfgs_damping_threshold);
    let armijo = T::of(opts.ls_armijo);
    let rho_floor = T::of(opts.merit_penalty_init) * scale;
    let rho_max = T::of(opts.merit_penalty_max) * scale;
    let growth = T::of(opts.merit_penalty_growth);
    let mut rho = vec![rho_floor; m];
    let mut h = Mat::scaled_identity(n, scale);
    let mut fresh_hessian = true;
    let mut scaled_once = false;

    let mut log = Vec::new();
    let mut lambda = vec![T::zero(); m];
    let mut kkt = Kkt { residual: f64::INFINITY, violation: max_violation(&ev.constraints).to_f64_lossy() };
    let mut status = SolveStatus::MaxIterations;
    let mut best_violation = f64::INFINITY;
    let mut stalled = 0usize;
    let mut iter = 0usize;

    while iter < opts.max_iter {
        let dlo: Vec<T> = (0..n).map(|j| lb[j] - x[j]).collect();
        let dup: Vec<T> = (0..n).map(|j| ub[j] - x[j]).collect();
        let step = match solve_subproblem(&h, &ev, &dlo, &dup, &rho, scale) {
            Ok(s) => s,
            Err(_) if !fresh_hessian => {
                h = Mat::scaled_identity(n, scale);
                fresh_hessian = true;
                continue;
            }
            Err(_) => {
                status = SolveStatus::LineSearchFailure;
                break;
            }
        };
        lambda = step.lambda.clone();
        kkt = kkt_measure(&ev, &x, &lb, &ub, &step.qp, &lambda, scale);
        if kkt.residual <= tol && kkt.violation <= tol {
            status = SolveStatus::Converged;
            break;
        }

        // per-constraint penalties must dominate the multipliers for the
        // step to descend; they relax again once a multiplier shrinks
        for (r, l) in rho.iter_mut().zip(&lambda) {
            let need = l.abs() * T::of(1.5);
            *r = if need > *r { need.max(*r * growth).min(rho_max) } else { ((*r + need) / T::of(2.0)).max(rho_floor) };
        }

        let d = &step.d;
        let jd = ev.jacobian.mul_vec(d);
        let lin: Vec<T> = ev.constraints.iter().zip(&jd).map(|(&c, &j)| c + j).collect();
        let merit0 = ev.objective + weighted_violation(&ev.constraints, &rho);
        let mut slope =
            dot(&ev.gradient, d) - weighted_violation(&ev.constraints, &rho) + weighted_violation(&lin, &rho);
        if !(slope < T::zero()) {
            slope = -dot(d, &h.mul_vec(d)).abs();
        }

        // Armijo backtracking on the l1 merit
        let mut accepted: Option<(Vec<T>, T, f64)> = None;
        let mut alpha = T::one();
        for k in 0..opts.ls_max_steps {
            let mut xt = x.clone();
            axpy(alpha, d, &mut xt);
            clamp_into(&mut xt, &lb, &ub);
            let trial = merit(nlp, &xt, &rho);
            if let Some((mt, _)) = &trial {
                if *mt <= merit0 + armijo * alpha * slope {
                    accepted = Some((xt, *mt, alpha.to_f64_lossy()));
                    break;
                }
            }
            if k == 0 && !step.elastic {
                if let Some((_, ct)) = &trial {
                    // second-order correction: re-linearize around the trial constraint values
                    let rhs: Vec<T> = ct.iter().zip(&jd).map(|(&c, &j)| j - c).collect();
                    let soc = solve_qp(&QpProblem {
                        hessian: &h,
                        gradient: &ev.gradient,
                        a: &ev.jacobian,
                        b: &rhs,
                        lower: &dlo,
                        upper: &dup,
                    });
                    if let Ok(soc) = soc {
                        let mut xs = x.clone();
                        axpy(T::one(), &soc.x, &mut xs);
                        clamp_into(&mut xs, &lb, &ub);
                        if let Some((ms, _)) = merit(nlp, &xs, &rho) {
                            if ms <= merit0 + armijo * slope {
                                accepted = Some((xs, ms, 1.0));
                                break;
                            }
                        }
                    }
                }
            }
            alpha = alpha * T::of(opts.ls_backtrack_factor);
        }

        let Some((x_new, merit_new, step_length)) = accepted else {
            if !fresh_hessian {
                h = Mat::scaled_identity(n, scale);
                fresh_hessian = true;
                continue;
            }
            status = SolveStatus::LineSearchFailure;
            break;
        };

        let ev_new = match nlp.derivatives(&x_new) {
            Ok(e) => e,
            Err(_) => {
                status = SolveStatus::Diverged;
                break;
            }
        };

        let s: Vec<T> = x_new.iter().zip(&x).map(|(a, b)| *a - *b).collect();
        let lagrangian_gradient = |e: &NlpEval<T>| {
            let mut g = e.gradient.clone();
            axpy(T::one(), &e.jacobian.tr_mul_vec(&lambda), &mut g);
            g
        };
        let gl_new = lagrangian_gradient(&ev_new);
        let gl_old = lagrangian_gradient(&ev);
        let y: Vec<T> = gl_new.iter().zip(&gl_old).map(|(a, b)| *a - *b).collect();
        if !scaled_once {
            let sy = dot(&s, &y);
            if sy > T::zero() {
                h = Mat::scaled_identity(n, dot(&y, &y) / sy);
                scaled_once = true;
            }
        }
        let previous = h.clone();
        bfgs_update(&mut h, &s, &y, damping);
        if cholesky(&h).is_some() {
            fresh_hessian = false;
        } else {
            // rounding destroyed definiteness; drop this update
            h = previous;
        }

        x = x_new;
        ev = ev_new;
        iter += 1;
        let viol = max_violation(&ev.constraints).to_f64_lossy();
        let rho_top = rho.iter().fold(T::zero(), |a, &r| a.max(r));
        log.push(IterationRecord {
            iter,
            objective: ev.objective.to_f64_lossy(),
            merit_start: merit0.to_f64_lossy(),
            merit: merit_new.to_f64_lossy(),
            step_length,
            max_violation: viol,
            kkt_residual: kkt.residual,
            penalty: rho_top.to_f64_lossy(),
        });

        if viol > tol {
            if viol < best_violation - 1e-12 {
                best_violation = viol;
                stalled = 0;
            } else {
                stalled += 1;
            }
            if stalled >= 20 && rho_top >= rho_max {
                status = SolveStatus::InfeasibleStall;
                break;
            }
        } else {
            stalled = 0;
        }
    }

    if status != SolveStatus::Converged {
        kkt.violation = max_violation(&ev.constraints).to_f64_lossy();
    }
    SqpResult {
        status,
        objective: ev.objective,
        constraints: ev.constraints,
        x,
        lambda,
        kkt_residual: kkt.residual,
        max_violation: kkt.violation,
        iterations: iter,
        log,
        gradient_check: check,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Closure-backed problem with hand-written derivatives.
    struct Toy<F, G> {
        n: usize,
        m: usize,
        lower: Vec<f64>,
        upper: Vec<f64>,
        values: F,
        derivs: G,
    }

    impl<F, G> Nlp<f64> for Toy<F, G>
    where
        F: Fn(&[f64]) -> (f64, Vec<f64>),
        G: Fn(&[f64]) -> (Vec<f64>, Vec<Vec<f64>>),
    {
        fn num_vars(&self) -> usize {
            self.n
        }
        fn num_constraints(&self) -> usize {
            self.m
        }
        fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
            (self.lower.clone(), self.upper.clone())
        }
        fn values(&self, x: &[f64]) -> Result<(f64, Vec<f64>), Error> {
            Ok((self.values)(x))
        }
        fn derivatives(&self, x: &[f64]) -> Result<NlpEval<f64>, Error> {
            let (objective, constraints) = (self.values)(x);
            let (gradient, jac) = (self.derivs)(x);
            let jacobian = if jac.is_empty() { Mat::zeros(0, self.n) } else { Mat::from_rows(&jac) };
            Ok(NlpEval { objective, gradient, constraints, jacobian })
        }
    }

    fn free(n: usize) -> (Vec<f64>, Vec<f64>) {
        (vec![f64::NEG_INFINITY; n], vec![f64::INFINITY; n])
    }

    #[test]
    fn bfgs_keeps_positive_definite_with_damping() {
        let mut h = Mat::identity(2);
        // negative curvature pair forces damping
        bfgs_update(&mut h, &[1.0, 0.0], &[-1.0, 0.5], 0.2);
        assert!(cholesky(&h).is_some());
        // secant condition with the damped y: H s = y_damped
        let hs = h.mul_vec(&[1.0, 0.0]);
        assert!(hs[0] > 0.0);
    }

    #[test]
    fn bfgs_secant_condition_without_damping() {
        let mut h: Mat<f64> = Mat::identity(2);
        bfgs_update(&mut h, &[1.0, 2.0], &[3.0, 1.0], 0.2);
        let hs = h.mul_vec(&[1.0, 2.0]);
        assert!((hs[0] - 3.0).abs() < 1e-12 && (hs[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn one_variable_toy() {
        let (lower, upper) = free(1);
        let nlp = Toy {
            n: 1,
            m: 1,
            lower,
            upper,
            values: |x: &[f64]| (x[0] * x[0], vec![1.0 - x[0]]),
            derivs: |x: &[f64]| (vec![2.0 * x[0]], vec![vec![-1.0]]),
        };
        let r = minimize(&nlp, &[5.0], &SolverOptions::default());
        assert_eq!(r.status, SolveStatus::Converged);
        assert!((r.x[0] - 1.0).abs() < 1e-9);
        assert!((r.objective - 1.0).abs() < 1e-9);
        assert!((r.lambda[0] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn constrained_rosenbrock() {
        let (lower, upper) = free(2);
        let nlp = Toy {
            n: 2,
            m: 1,
            lower,
            upper,
            values: |x: &[f64]| ((1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2), vec![x[0] + x[1] - 2.0]),
            derivs: |x: &[f64]| {
                let t = x[1] - x[0] * x[0];
                (vec![-2.0 * (1.0 - x[0]) - 400.0 * x[0] * t, 200.0 * t], vec![vec![1.0, 1.0]])
            },
        };
        let r = minimize(&nlp, &[-1.2, 1.0], &SolverOptions::default());
        assert_eq!(r.status, SolveStatus::Converged, "{:?}", r.log.last());
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6, "{:?}", r.x);
        assert!(r.objective < 1e-10);
        // merit never increases across accepted steps
        assert!(r.log.iter().all(|rec| rec.merit <= rec.merit_start));
    }

    #[test]
    fn bounds_hold_at_every_iterate() {
        // min (x-3)^2 + (y+1)^2 with 0 <= x <= 2, y >= 0.5 and x*y >= 0.5
        let nlp = Toy {
            n: 2,
            m: 1,
            lower: vec![0.0, 0.5],
            upper: vec![2.0, f64::INFINITY],
            values: |x: &[f64]| ((x[0] - 3.0).powi(2) + (x[1] + 1.0).powi(2), vec![0.5 - x[0] * x[1]]),
            derivs: |x: &[f64]| (vec![2.0 * (x[0] - 3.0), 2.0 * (x[1] + 1.0)], vec![vec![-x[1], -x[0]]]),
        };
        let r = minimize(&nlp, &[0.1, 5.0], &SolverOptions::default());
        assert_eq!(r.status, SolveStatus::Converged);
        assert!((r.x[0] - 2.0).abs() < 1e-9 && (r.x[1] - 0.5).abs() < 1e-9, "{:?}", r.x);
    }

    #[test]
    fn infeasible_linearization_uses_elastic_mode() {
        // start where the linearized circle constraint conflicts with the bound
        let nlp = Toy {
            n: 2,
            m: 1,
            lower: vec![f64::NEG_INFINITY, -0.5],
            upper: vec![f64::INFINITY, f64::INFINITY],
            values: |x: &[f64]| (x[0] + x[1], vec![x[0] * x[0] + x[1] * x[1] - 1.0]),
            derivs: |x: &[f64]| (vec![1.0, 1.0], vec![vec![2.0 * x[0], 2.0 * x[1]]]),
        };
        let r = minimize(&nlp, &[3.0, 3.0], &SolverOptions::default());
        assert_eq!(r.status, SolveStatus::Converged);
        // the free optimum (-1/sqrt2, -1/sqrt2) violates y >= -0.5, so y sits on its bound
        assert!((r.x[1] + 0.5).abs() < 1e-8);
        assert!((r.x[0] + 0.75f64.sqrt()).abs() < 1e-8);
    }

    #[test]
    fn deterministic() {
        let (lower, upper) = free(2);
        let mk = || Toy {
            n: 2,
            m: 1,
            lower: lower.clone(),
            upper: upper.clone(),
            values: |x: &[f64]| ((1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2), vec![x[0] + x[1] - 2.0]),
            derivs: |x: &[f64]| {
                let t = x[1] - x[0] * x[0];
                (vec![-2.0 * (1.0 - x[0]) - 400.0 * x[0] * t, 200.0 * t], vec![vec![1.0, 1.0]])
            },
        };
        let a = minimize(&mk(), &[-1.2, 1.0], &SolverOptions::default());
        let b = minimize(&mk(), &[-1.2, 1.0], &SolverOptions::default());
        assert_eq!(a.x, b.x);
        assert_eq!(a.log, b.log);
    }

    #[test]
    fn gradient_check_flags_wrong_derivative() {
        let (lower, upper) = free(1);
        let nlp = Toy {
            n: 1,
            m: 0,
            lower,
            upper,
            values: |x: &[f64]| (x[0] * x[0], vec![]),
            derivs: |x: &[f64]| (vec![3.0 * x[0]], vec![]),
        };
        let opts = SolverOptions { fd_check: true, max_iter: 1, ..Default::default() };
        let r = minimize(&nlp, &[1.0], &opts);
        assert!(r.gradient_check.unwrap().max_rel_error > 0.3);
    }

    #[test]
    fn single_precision_toy() {
        struct Quad;
        impl Nlp<f32> for Quad {
            fn num_vars(&self) -> usize {
                1
            }
            fn num_constraints(&self) -> usize {
                1
            }
            fn bounds(&self) -> (Vec<f32>, Vec<f32>) {
                (vec![f32::NEG_INFINITY], vec![f32::INFINITY])
            }
            fn values(&self, x: &[f32]) -> Result<(f32, Vec<f32>), Error> {
                Ok((x[0] * x[0], vec![1.0 - x[0]]))
            }
            fn derivatives(&self, x: &[f32]) -> Result<NlpEval<f32>, Error> {
                Ok(NlpEval {
                    objective: x[0] * x[0],
                    gradient: vec![2.0 * x[0]],
                    constraints: vec![1.0 - x[0]],
                    jacobian: Mat::from_rows(&[vec![-1.0]]),
                })
            }
        }
        let r = minimize(&Quad, &[4.0f32], &SolverOptions { kkt_tol: 1e-5, ..Default::default() });
        assert_eq!(r.status, SolveStatus::Converged);
        assert!((r.x[0] - 1.0).abs() < 1e-5);
    }
}
