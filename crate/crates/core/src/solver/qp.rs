//! Dense strictly convex QP solver (Goldfarb-Idnani dual active set).
//!
//! Solves
//!
//! ```text
//! minimize    1/2 d' H d + g' d
//! subject to  A d <= b
//!             lower <= d <= upper
//! ```
//!
//! Starting from the unconstrained minimizer, the most violated constraint is
//! added to the active set at each major iteration; the factorization
//! `J = L^{-T} Q` and the triangular `R` are maintained with Givens rotations,
//! so each active-set change costs O(n^2).

use thiserror::Error;

use crate::linalg::{cholesky, dot, lower_inverse_transpose, Mat};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum QpError {
    #[error("QP Hessian is not positive definite")]
    NotPositiveDefinite,
    #[error("QP constraints are infeasible")]
    Infeasible,
    #[error("QP active-set iteration limit reached")]
    IterationLimit,
}

pub struct QpProblem<'a, T> {
    pub hessian: &'a Mat<T>,
    pub gradient: &'a [T],
    pub a: &'a Mat<T>,
    pub b: &'a [T],
    /// Entries may be `-inf`.
    pub lower: &'a [T],
    /// Entries may be `+inf`.
    pub upper: &'a [T],
}

#[derive(Clone, Debug)]
pub struct QpSolution<T> {
    pub x: Vec<T>,
    /// Multipliers of the general rows `A d <= b` (all >= 0).
    pub lambda: Vec<T>,
    /// Multipliers of `d >= lower`.
    pub mu_lower: Vec<T>,
    /// Multipliers of `d <= upper`.
    pub mu_upper: Vec<T>,
    pub objective: T,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Row {
    General(usize),
    Lower(usize),
    Upper(usize),
}

struct Rows<'a, T> {
    prob: &'a QpProblem<'a, T>,
    list: Vec<Row>,
    norms: Vec<T>,
}

impl<'a, T: Scalar> Rows<'a, T> {
    fn new(prob: &'a QpProblem<'a, T>) -> Self {
        let mut list = Vec::new();
        for i in 0..prob.a.rows() {
            list.push(Row::General(i));
        }
        for j in 0..prob.gradient.len() {
            if prob.lower[j] > T::neg_infinity() {
                list.push(Row::Lower(j));
            }
            if prob.upper[j] < T::infinity() {
                list.push(Row::Upper(j));
            }
        }
        let norms = list
            .iter()
            .map(|r| match *r {
                Row::General(i) => dot(prob.a.row(i), prob.a.row(i)).sqrt(),
                _ => T::one(),
            })
            .collect();
        Self { prob, list, norms }
    }

    /// Constraint in `n' x >= rhs` form: returns `n' x - rhs`.
    fn slack(&self, k: usize, x: &[T]) -> T {
        match self.list[k] {
            Row::General(i) => self.prob.b[i] - dot(self.prob.a.row(i), x),
            Row::Lower(j) => x[j] - self.prob.lower[j],
            Row::Upper(j) => self.prob.upper[j] - x[j],
        }
    }

    fn dot_normal(&self, k: usize, v: &[T]) -> T {
        match self.list[k] {
            Row::General(i) => -dot(self.prob.a.row(i), v),
            Row::Lower(j) => v[j],
            Row::Upper(j) => -v[j],
        }
    }

    /// `J^T n_k`.
    fn jt_normal(&self, k: usize, jm: &Mat<T>) -> Vec<T> {
        match self.list[k] {
            Row::General(i) => jm.tr_mul_vec(self.prob.a.row(i)).into_iter().map(|v| -v).collect(),
            Row::Lower(j) => jm.row(j).to_vec(),
            Row::Upper(j) => jm.row(j).iter().map(|&v| -v).collect(),
        }
    }
}

fn rotate_columns<T: Scalar>(m: &mut Mat<T>, a: usize, b: usize, c: T, s: T) {
    for i in 0..m.rows() {
        let (x, y) = (m[(i, a)], m[(i, b)]);
        m[(i, a)] = c * x + s * y;
        m[(i, b)] = -s * x + c * y;
    }
}

pub fn solve_qp<T: Scalar>(prob: &QpProblem<'_, T>) -> Result<QpSolution<T>, QpError> {
    let n = prob.gradient.len();
    debug_assert_eq!(prob.hessian.rows(), n);
    debug_assert_eq!(prob.a.cols(), n);
    debug_assert_eq!(prob.a.rows(), prob.b.len());
    if prob.lower.iter().zip(prob.upper).any(|(l, u)| l > u) {
        return Err(QpError::Infeasible);
    }

    let l = cholesky(prob.hessian).ok_or(QpError::NotPositiveDefinite)?;
    let mut jm = lower_inverse_transpose(&l);
    let mut r = Mat::zeros(n, n);

    // unconstrained minimizer x = -J J^T g
    let jtg = jm.tr_mul_vec(prob.gradient);
    let mut x = jm.mul_vec(&jtg).into_iter().map(|v| -v).collect::<Vec<_>>();

    let rows = Rows::new(prob);
    let m = rows.list.len();
    let mut active: Vec<usize> = Vec::new();
    let mut u: Vec<T> = Vec::new();
    let mut is_active = vec![false; m];

    let eps = T::epsilon();
    let feas_tol = eps * T::of(1e4);
    let max_iter = 50 * (n + m) + 100;
    let mut iterations = 0;

    'outer: loop {
        // most violated inactive constraint, scaled by row norm
        let mut p = None;
        let mut worst = T::zero();
        for k in 0..m {
            if is_active[k] {
                continue;
            }
            let s = rows.slack(k, &x);
            let rhs_scale = T::one() + s.abs();
            if s < -feas_tol * rhs_scale {
                let v = s / rows.norms[k];
                if v < worst {
                    worst = v;
                    p = Some(k);
                }
            }
        }
        let Some(p) = p else { break };
        let mut u_plus = T::zero();

        loop {
            iterations += 1;
            if iterations > max_iter {
                return Err(QpError::IterationLimit);
            }
            let q = active.len();
            let mut d = rows.jt_normal(p, &jm);

            // primal direction z = J2 d2
            let mut z = vec![T::zero(); n];
            for i in 0..n {
                let mut s = T::zero();
                for k in q..n {
                    s = s + jm[(i, k)] * d[k];
                }
                z[i] = s;
            }
            // dual direction r = R^{-1} d1
            let mut rv = vec![T::zero(); q];
            for i in (0..q).rev() {
                let mut s = d[i];
                for k in i + 1..q {
                    s = s - r[(i, k)] * rv[k];
                }
                rv[i] = s / r[(i, i)];
            }

            // partial step length: first active multiplier to hit zero
            let mut t1 = T::infinity();
            let mut drop_at = None;
            for j in 0..q {
                if rv[j] > T::zero() {
                    let t = u[j] / rv[j];
                    if t < t1 {
                        t1 = t;
                        drop_at = Some(j);
                    }
                }
            }
            // full step length
            let d2_sq = d[q..].iter().fold(T::zero(), |a, &v| a + v * v);
            let d_sq = d.iter().fold(T::zero(), |a, &v| a + v * v);
            let zn = rows.dot_normal(p, &z);
            let t2 = if d2_sq <= eps * d_sq || zn <= T::zero() { T::infinity() } else { -rows.slack(p, &x) / zn };
            let t = t1.min(t2);
            if t == T::infinity() {
                return Err(QpError::Infeasible);
            }

            if t2 == T::infinity() {
                // step in dual space only
                for j in 0..q {
                    u[j] = u[j] - t * rv[j];
                }
                u_plus = u_plus + t;
                let jd = drop_at.expect("finite t1 has an index");
                drop_constraint(jd, &mut active, &mut u, &mut is_active, &mut r, &mut jm);
                continue;
            }

            for i in 0..n {
                x[i] = x[i] + t * z[i];
            }
            for j in 0..q {
                u[j] = u[j] - t * rv[j];
            }
            u_plus = u_plus + t;

            if t2 <= t1 {
                // add p; d = J^T n_p is unchanged since J was not touched
                for j in (q + 1..n).rev() {
                    let (a, b) = (d[j - 1], d[j]);
                    if b == T::zero() {
                        continue;
                    }
                    let h = a.hypot(b);
                    let (c, s) = (a / h, b / h);
                    d[j - 1] = h;
                    d[j] = T::zero();
                    rotate_columns(&mut jm, j - 1, j, c, s);
                }
                for i in 0..=q {
                    r[(i, q)] = d[i];
                }
                active.push(p);
                u.push(u_plus);
                is_active[p] = true;
                continue 'outer;
            }
            let jd = drop_at.expect("partial step has an index");
            drop_constraint(jd, &mut active, &mut u, &mut is_active, &mut r, &mut jm);
        }
    }

    let mut lambda = vec![T::zero(); prob.a.rows()];
    let mut mu_lower = vec![T::zero(); n];
    let mut mu_upper = vec![T::zero(); n];
    for (&k, &uk) in active.iter().zip(&u) {
        match rows.list[k] {
            Row::General(i) => lambda[i] = uk,
            Row::Lower(j) => mu_lower[j] = uk,
            Row::Upper(j) => mu_upper[j] = uk,
        }
    }
    let hx = prob.hessian.mul_vec(&x);
    let objective = T::of(0.5) * dot(&x, &hx) + dot(prob.gradient, &x);
    Ok(QpSolution { x, lambda, mu_lower, mu_upper, objective, iterations })
}

fn drop_constraint<T: Scalar>(
    pos: usize,
    active: &mut Vec<usize>,
    u: &mut Vec<T>,
    is_active: &mut [bool],
    r: &mut Mat<T>,
    jm: &mut Mat<T>,
) {
    let q = active.len();
    is_active[active[pos]] = false;
    active.remove(pos);
    u.remove(pos);
    for col in pos..q - 1 {
        for i in 0..=col + 1 {
            r[(i, col)] = r[(i, col + 1)];
        }
    }
    let q = q - 1;
    for k in pos..q {
        let (a, b) = (r[(k, k)], r[(k + 1, k)]);
        if b == T::zero() {
            continue;
        }
        let h = a.hypot(b);
        let (c, s) = (a / h, b / h);
        for col in k..q {
            let (x, y) = (r[(k, col)], r[(k + 1, col)]);
            r[(k, col)] = c * x + s * y;
            r[(k + 1, col)] = -s * x + c * y;
        }
        r[(k + 1, k)] = T::zero();
        rotate_columns(jm, k, k + 1, c, s);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unbounded(n: usize) -> (Vec<f64>, Vec<f64>) {
        (vec![f64::NEG_INFINITY; n], vec![f64::INFINITY; n])
    }

    #[test]
    fn unconstrained_minimum() {
        let h = Mat::from_rows(&[vec![2.0, 0.0], vec![0.0, 4.0]]);
        let a = Mat::zeros(0, 2);
        let (lo, up) = unbounded(2);
        let sol = solve_qp(&QpProblem { hessian: &h, gradient: &[-2.0, -8.0], a: &a, b: &[], lower: &lo, upper: &up })
            .unwrap();
        assert!((sol.x[0] - 1.0).abs() < 1e-14 && (sol.x[1] - 2.0).abs() < 1e-14);
    }

    /// min 1/2 x^2 + 1/2 y^2 + x  s.t. x + 2y >= 1  ->  (-0.6, 0.8)
    #[test]
    fn single_active_constraint() {
        let h = Mat::identity(2);
        let a = Mat::from_rows(&[vec![-1.0, -2.0]]);
        let (lo, up) = unbounded(2);
        let sol =
            solve_qp(&QpProblem { hessian: &h, gradient: &[1.0, 0.0], a: &a, b: &[-1.0], lower: &lo, upper: &up })
                .unwrap();
        assert!((sol.x[0] + 0.6).abs() < 1e-14 && (sol.x[1] - 0.8).abs() < 1e-14, "{:?}", sol.x);
        assert!((sol.lambda[0] - 0.4).abs() < 1e-14);
    }

    #[test]
    fn bounds_are_respected() {
        let h = Mat::identity(3);
        let a = Mat::zeros(0, 3);
        let sol = solve_qp(&QpProblem {
            hessian: &h,
            gradient: &[-5.0, 5.0, 0.5],
            a: &a,
            b: &[],
            lower: &[-1.0, -1.0, -1.0],
            upper: &[1.0, 1.0, 1.0],
        })
        .unwrap();
        assert_eq!(sol.x, vec![1.0, -1.0, -0.5]);
        assert_eq!(sol.mu_upper[0], 4.0);
        assert_eq!(sol.mu_lower[1], 4.0);
    }

    #[test]
    fn infeasible_detected() {
        let h = Mat::identity(1);
        let a = Mat::from_rows(&[vec![1.0], vec![-1.0]]);
        let (lo, up) = unbounded(1);
        let r = solve_qp(&QpProblem { hessian: &h, gradient: &[0.0], a: &a, b: &[-1.0, -1.0], lower: &lo, upper: &up });
        assert_eq!(r.unwrap_err(), QpError::Infeasible);
    }

    #[test]
    fn not_positive_definite() {
        let h = Mat::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        let a = Mat::zeros(0, 2);
        let (lo, up) = unbounded(2);
        let r = solve_qp(&QpProblem { hessian: &h, gradient: &[0.0, 0.0], a: &a, b: &[], lower: &lo, upper: &up });
        assert_eq!(r.unwrap_err(), QpError::NotPositiveDefinite);
    }

    /// Random QPs: verify KKT conditions of the returned point.
    #[test]
    fn random_problems_satisfy_kkt() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..200 {
            let n = rng.gen_range(2..12);
            let m = rng.gen_range(0..2 * n);
            let mut f = Mat::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    f[(i, j)] = rng.gen_range(-1.0..1.0);
                }
            }
            let mut h = Mat::scaled_identity(n, 0.1);
            for i in 0..n {
                for j in 0..n {
                    h[(i, j)] += (0..n).map(|k| f[(i, k)] * f[(j, k)]).sum::<f64>();
                }
            }
            let g: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let mut a = Mat::zeros(m, n);
            for i in 0..m {
                for j in 0..n {
                    a[(i, j)] = rng.gen_range(-1.0..1.0);
                }
            }
            // b chosen so that a box-interior point is feasible
            let x0: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let b: Vec<f64> = (0..m).map(|i| dot(a.row(i), &x0) + rng.gen_range(0.0..0.5)).collect();
            let lo: Vec<f64> = (0..n).map(|j| if j % 3 == 0 { -1.0 } else { f64::NEG_INFINITY }).collect();
            let up: Vec<f64> = (0..n).map(|j| if j % 2 == 0 { 1.0 } else { f64::INFINITY }).collect();
            let sol = solve_qp(&QpProblem { hessian: &h, gradient: &g, a: &a, b: &b, lower: &lo, upper: &up })
                .unwrap_or_else(|e| panic!("trial {trial}: {e}"));
            let hx = h.mul_vec(&sol.x);
            let atl = a.tr_mul_vec(&sol.lambda);
            for j in 0..n {
                let grad = hx[j] + g[j] + atl[j] + sol.mu_upper[j] - sol.mu_lower[j];
                assert!(grad.abs() < 1e-9, "trial {trial}: stationarity {grad}");
                assert!(sol.x[j] >= lo[j] - 1e-10 && sol.x[j] <= up[j] + 1e-10);
                assert!(sol.mu_lower[j] >= 0.0 && sol.mu_upper[j] >= 0.0);
            }
            for i in 0..m {
                let s = dot(a.row(i), &sol.x) - b[i];
                assert!(s <= 1e-10, "trial {trial}: violation {s}");
                assert!(sol.lambda[i] >= 0.0);
                assert!((sol.lambda[i] * s).abs() < 1e-9, "trial {trial}: complementarity");
            }
        }
    }
}
