//! Convex QP: null-space elimination of equalities, a primal active-set
//! method on the inequalities, and a ball constraint on a sub-vector handled
//! through its multiplier (the regularized problems `Q + 2 lambda I` on the
//! ball block are solved and lambda is located by safeguarded bisection).

use crate::error::{MpecError, Result};
use crate::linalg::{is_symmetric, lstsq, max_abs, min_symmetric_eigenvalue, norm_inf, null_space, select_rows, Mat, Vector};

/// `||d[start..start+len]||^2 <= radius_sq`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ball {
    pub start: usize,
    pub len: usize,
    pub radius_sq: f64,
}

/// `min 1/2 d'Qd + c'd  s.t.  E d = e,  A d <= b,  optional ball`.
#[derive(Debug, Clone)]
pub struct QpProblem {
    pub q: Mat,
    pub c: Vector,
    pub eq_mat: Mat,
    pub eq_rhs: Vector,
    pub ineq_mat: Mat,
    pub ineq_rhs: Vector,
    pub ball: Option<Ball>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub d: Vector,
    pub eq_multipliers: Vector,
    pub ineq_multipliers: Vector,
    pub ball_multiplier: f64,
    pub value: f64,
    pub status: QpStatus,
    pub kkt_residual: f64,
    pub iterations: usize,
}

impl QpProblem {
    pub fn new(q: Mat, c: Vector) -> Self {
        let n = c.len();
        QpProblem {
            q,
            c,
            eq_mat: Mat::zeros(0, n),
            eq_rhs: Vector::zeros(0),
            ineq_mat: Mat::zeros(0, n),
            ineq_rhs: Vector::zeros(0),
            ball: None,
        }
    }

    pub fn with_equalities(mut self, e: Mat, rhs: Vector) -> Self {
        self.eq_mat = e;
        self.eq_rhs = rhs;
        self
    }

    pub fn with_inequalities(mut self, a: Mat, b: Vector) -> Self {
        self.ineq_mat = a;
        self.ineq_rhs = b;
        self
    }

    pub fn with_ball(mut self, start: usize, len: usize, radius_sq: f64) -> Self {
        self.ball = Some(Ball { start, len, radius_sq });
        self
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn objective(&self, d: &Vector) -> f64 {
        0.5 * d.dot(&(&self.q * d)) + self.c.dot(d)
    }

    /// Largest constraint violation at `d` (equality, inequality and ball).
    pub fn max_violation(&self, d: &Vector) -> f64 {
        let mut v = 0.0_f64;
        if self.eq_mat.nrows() > 0 {
            v = v.max(norm_inf(&(&self.eq_mat * d - &self.eq_rhs)));
        }
        if self.ineq_mat.nrows() > 0 {
            let s = &self.ineq_mat * d - &self.ineq_rhs;
            v = v.max(s.iter().copied().fold(0.0, f64::max));
        }
        if let Some(b) = self.ball {
            v = v.max(ball_norm_sq(d, &b) - b.radius_sq);
        }
        v
    }

    fn validate(&self) -> Result<()> {
        let n = self.dim();
        let shape_ok = self.q.nrows() == n
            && self.q.ncols() == n
            && self.eq_mat.ncols() == n
            && self.eq_mat.nrows() == self.eq_rhs.len()
            && self.ineq_mat.ncols() == n
            && self.ineq_mat.nrows() == self.ineq_rhs.len();
        if !shape_ok {
            return Err(MpecError::Dimension("QP blocks are inconsistent".into()));
        }
        if let Some(b) = self.ball {
            if b.start + b.len > n || !(b.radius_sq >= 0.0) {
                return Err(MpecError::Dimension("ball range outside the variable vector".into()));
            }
        }
        let scale = 1.0 + max_abs(&self.q);
        if !is_symmetric(&self.q, 1e-10 * scale) {
            return Err(MpecError::Precondition("QP Hessian is not symmetric".into()));
        }
        if min_symmetric_eigenvalue(&self.q) < -1e-10 * scale {
            return Err(MpecError::Precondition("QP Hessian is not positive semidefinite".into()));
        }
        Ok(())
    }
}

fn ball_norm_sq(d: &Vector, b: &Ball) -> f64 {
    d.rows(b.start, b.len).norm_squared()
}

struct Reduction {
    z: Mat,
    d0: Vector,
}

fn reduce_equalities(e: &Mat, rhs: &Vector) -> Result<Reduction> {
    let n = e.ncols();
    if e.nrows() == 0 {
        return Ok(Reduction { z: Mat::identity(n, n), d0: Vector::zeros(n) });
    }
    let d0 = lstsq(e, rhs);
    let res = norm_inf(&(e * &d0 - rhs));
    if res > 1e-9 * (1.0 + norm_inf(rhs)) {
        return Err(MpecError::Infeasible);
    }
    Ok(Reduction { z: null_space(e, 1e-12), d0 })
}

struct ActiveSetOutcome {
    u: Vector,
    mu: Vector,
    iterations: usize,
}

/// Primal active-set method for `min 1/2 u'Hu + g'u s.t. A u <= b` from a
/// feasible `u`. `H` may be singular; directions of zero curvature with a
/// nonzero gradient component are followed as rays.
fn active_set(h: &Mat, g: &Vector, a: &Mat, b: &Vector, mut u: Vector) -> Result<ActiveSetOutcome> {
    let p = u.len();
    let k = a.nrows();
    let max_iter = 20 * (p + k) + 100;
    let row_norm: Vec<f64> = (0..k).map(|i| a.row(i).norm()).collect();
    let h_scale = 1.0 + max_abs(h);
    let mut working: Vec<usize> = Vec::new();

    for iter in 0..max_iter {
        let grad = h * &u + g;
        let aw = select_rows(a, &working);
        let (step, is_ray) = if p == 0 {
            (Vector::zeros(0), false)
        } else {
            let zw = if working.is_empty() { Mat::identity(p, p) } else { null_space(&aw, 1e-12) };
            if zw.ncols() == 0 {
                (Vector::zeros(p), false)
            } else {
                let hr = zw.transpose() * h * &zw;
                let hr = (&hr + hr.transpose()) * 0.5;
                let gr = zw.transpose() * &grad;
                let eig = hr.symmetric_eigen();
                let coeff = eig.eigenvectors.transpose() * &gr;
                let curv_floor = 1e-11 * h_scale;
                let grad_floor = 1e-11 * (1.0 + norm_inf(&grad));
                let mut newton = Vector::zeros(zw.ncols());
                let mut ray = Vector::zeros(zw.ncols());
                for j in 0..zw.ncols() {
                    let col = eig.eigenvectors.column(j);
                    if eig.eigenvalues[j] > curv_floor {
                        newton -= col * (coeff[j] / eig.eigenvalues[j]);
                    } else if coeff[j].abs() > grad_floor {
                        ray -= col * coeff[j];
                    }
                }
                if ray.norm() > 0.0 {
                    (&zw * ray, true)
                } else {
                    (&zw * newton, false)
                }
            }
        };

        if step.norm() <= 1e-13 * (1.0 + u.norm()) {
            let mut mu = Vector::zeros(k);
            if working.is_empty() {
                return Ok(ActiveSetOutcome { u, mu, iterations: iter });
            }
            let lam = lstsq(&aw.transpose(), &(-&grad));
            let tol = 1e-12 * (1.0 + norm_inf(&grad));
            let mut drop: Option<usize> = None;
            for (j, &val) in lam.iter().enumerate() {
                if val < -tol {
                    let better = match drop {
                        None => true,
                        Some(d) => {
                            val < lam[d] - tol || ((val - lam[d]).abs() <= tol && working[j] < working[d])
                        }
                    };
                    if better {
                        drop = Some(j);
                    }
                }
            }
            match drop {
                None => {
                    for (j, &i) in working.iter().enumerate() {
                        mu[i] = lam[j].max(0.0);
                    }
                    return Ok(ActiveSetOutcome { u, mu, iterations: iter });
                }
                Some(j) => {
                    working.remove(j);
                    continue;
                }
            }
        }

        let mut alpha = if is_ray { f64::INFINITY } else { 1.0 };
        let mut block: Option<usize> = None;
        let snorm = step.norm();
        for i in 0..k {
            if working.contains(&i) {
                continue;
            }
            let ap = a.row(i).dot(&step.transpose());
            if ap > 1e-14 * row_norm[i] * snorm {
                let slack = (b[i] - a.row(i).dot(&u.transpose())).max(0.0);
                let t = slack / ap;
                let tie_tol = 1e-14 * (1.0 + if alpha.is_finite() { alpha.abs() } else { 0.0 });
                if t < alpha - tie_tol {
                    alpha = t;
                    block = Some(i);
                } else if (t - alpha).abs() <= tie_tol && block.is_none_or(|bi| i < bi) {
                    alpha = alpha.min(t);
                    block = Some(i);
                }
            }
        }
        if !alpha.is_finite() {
            return Err(MpecError::Unbounded);
        }
        u += step * alpha;
        if let Some(i) = block {
            working.push(i);
        }
    }
    Err(MpecError::MaxIterations)
}

/// Phase one: a point with `A u <= b` obtained from the LP `min t s.t. A u - t <= b, t >= 0`.
fn find_feasible(a: &Mat, b: &Vector, u0: Vector) -> Result<Vector> {
    let k = a.nrows();
    let p = u0.len();
    let tol = 1e-9 * (1.0 + norm_inf(b));
    if k == 0 {
        return Ok(u0);
    }
    let viol = (a * &u0 - b).iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if viol <= tol {
        return Ok(u0);
    }
    let mut a1 = Mat::zeros(k + 1, p + 1);
    a1.view_mut((0, 0), (k, p)).copy_from(a);
    for i in 0..k {
        a1[(i, p)] = -1.0;
    }
    a1[(k, p)] = -1.0;
    let mut b1 = Vector::zeros(k + 1);
    b1.rows_mut(0, k).copy_from(b);
    let mut g1 = Vector::zeros(p + 1);
    g1[p] = 1.0;
    let mut start = Vector::zeros(p + 1);
    start.rows_mut(0, p).copy_from(&u0);
    start[p] = viol;
    let out = active_set(&Mat::zeros(p + 1, p + 1), &g1, &a1, &b1, start)?;
    let u = out.u.rows(0, p).into_owned();
    let viol = (a * &u - b).iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if viol > tol {
        return Err(MpecError::Infeasible);
    }
    Ok(u)
}

struct Reduced<'a> {
    problem: &'a QpProblem,
    red: Reduction,
    a_r: Mat,
    b_r: Vector,
    feasible: Vector,
}

struct Inner {
    d: Vector,
    mu: Vector,
    iterations: usize,
}

impl<'a> Reduced<'a> {
    fn new(problem: &'a QpProblem) -> Result<Self> {
        let red = reduce_equalities(&problem.eq_mat, &problem.eq_rhs)?;
        let a_r = &problem.ineq_mat * &red.z;
        let b_r = &problem.ineq_rhs - &problem.ineq_mat * &red.d0;
        let feasible = find_feasible(&a_r, &b_r, Vector::zeros(red.z.ncols()))?;
        Ok(Reduced { problem, red, a_r, b_r, feasible })
    }

    fn hessian(&self, lambda: f64) -> Mat {
        let mut q = self.problem.q.clone();
        if let (Some(b), true) = (self.problem.ball, lambda > 0.0) {
            for i in b.start..b.start + b.len {
                q[(i, i)] += 2.0 * lambda;
            }
        }
        q
    }

    fn solve(&self, lambda: f64) -> Result<Inner> {
        let q = self.hessian(lambda);
        let z = &self.red.z;
        let h = z.transpose() * &q * z;
        let h = (&h + h.transpose()) * 0.5;
        let g = z.transpose() * (&q * &self.red.d0 + &self.problem.c);
        let out = active_set(&h, &g, &self.a_r, &self.b_r, self.feasible.clone())?;
        Ok(Inner { d: &self.red.d0 + z * out.u, mu: out.mu, iterations: out.iterations })
    }
}

fn finish(problem: &QpProblem, inner: Inner, lambda: f64, q_lambda: &Mat, iterations: usize) -> QpSolution {
    let d = inner.d;
    let mu = inner.mu;
    let mut grad = q_lambda * &d + &problem.c;
    if problem.ineq_mat.nrows() > 0 {
        grad += problem.ineq_mat.transpose() * &mu;
    }
    let nu = if problem.eq_mat.nrows() > 0 {
        lstsq(&problem.eq_mat.transpose(), &(-&grad))
    } else {
        Vector::zeros(0)
    };
    let mut stat = grad.clone();
    if problem.eq_mat.nrows() > 0 {
        stat += problem.eq_mat.transpose() * &nu;
    }
    let mut kkt = norm_inf(&stat).max(problem.max_violation(&d));
    if problem.ineq_mat.nrows() > 0 {
        let s = &problem.ineq_mat * &d - &problem.ineq_rhs;
        for i in 0..s.len() {
            kkt = kkt.max((mu[i] * s[i]).abs());
        }
    }
    if let Some(b) = problem.ball {
        kkt = kkt.max((lambda * (b.radius_sq - ball_norm_sq(&d, &b))).abs());
    }
    QpSolution {
        value: problem.objective(&d),
        d,
        eq_multipliers: nu,
        ineq_multipliers: mu,
        ball_multiplier: lambda,
        status: QpStatus::Optimal,
        kkt_residual: kkt,
        iterations,
    }
}

/// Solves a convex QP. Fails with `Infeasible`, `Unbounded` (only possible
/// when `Q` is singular on the reduced space) or `MaxIterations`.
pub fn solve_qp(problem: &QpProblem) -> Result<QpSolution> {
    problem.validate()?;
    let ball = match problem.ball {
        Some(b) if b.len > 0 => b,
        _ => {
            let r = Reduced::new(problem)?;
            let inner = r.solve(0.0)?;
            let it = inner.iterations;
            return Ok(finish(problem, inner, 0.0, &problem.q, it));
        }
    };

    if ball.radius_sq <= f64::MIN_POSITIVE {
        // a zero radius pins the block; solve with it as equalities
        let n = problem.dim();
        let mut e = Mat::zeros(problem.eq_mat.nrows() + ball.len, n);
        e.view_mut((0, 0), (problem.eq_mat.nrows(), n)).copy_from(&problem.eq_mat);
        for j in 0..ball.len {
            e[(problem.eq_mat.nrows() + j, ball.start + j)] = 1.0;
        }
        let mut rhs = Vector::zeros(e.nrows());
        rhs.rows_mut(0, problem.eq_rhs.len()).copy_from(&problem.eq_rhs);
        let pinned = QpProblem { eq_mat: e, eq_rhs: rhs, ball: None, ..problem.clone() };
        let mut sol = solve_qp(&pinned)?;
        sol.d.rows_mut(ball.start, ball.len).fill(0.0);
        sol.value = problem.objective(&sol.d);
        sol.eq_multipliers = sol.eq_multipliers.rows(0, problem.eq_rhs.len()).into_owned();
        sol.kkt_residual = sol.kkt_residual.max(problem.max_violation(&sol.d));
        return Ok(sol);
    }

    let r = Reduced::new(problem)?;
    let rho = ball.radius_sq;
    let norm_at = |inner: &Inner| ball_norm_sq(&inner.d, &ball);
    let mut total_iters = 0;

    let first = r.solve(0.0)?;
    total_iters += first.iterations;
    if norm_at(&first) <= rho {
        return Ok(finish(problem, first, 0.0, &problem.q, total_iters));
    }

    // bracket the multiplier: ||d_R(lambda)||^2 is nonincreasing in lambda
    let scale = 1.0 + max_abs(&problem.q) + norm_inf(&problem.c);
    let mut lo = 0.0_f64;
    let mut hi = scale;
    let mut hi_sol = r.solve(hi)?;
    total_iters += hi_sol.iterations;
    let mut guard = 0;
    while norm_at(&hi_sol) > rho {
        lo = hi;
        hi *= 10.0;
        guard += 1;
        if guard > 40 {
            return Err(MpecError::Infeasible);
        }
        hi_sol = r.solve(hi)?;
        total_iters += hi_sol.iterations;
    }

    for _ in 0..200 {
        if (rho - norm_at(&hi_sol)).abs() <= 1e-13 * rho || hi - lo <= 1e-15 * hi {
            break;
        }
        let mid = if lo > 0.0 && hi / lo > 4.0 { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
        let s = r.solve(mid)?;
        total_iters += s.iterations;
        if norm_at(&s) > rho {
            lo = mid;
        } else {
            hi = mid;
            hi_sol = s;
        }
    }
    let q_lambda = r.hessian(hi);
    Ok(finish(problem, hi_sol, hi, &q_lambda, total_iters))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem_two_qp(radius_sq: f64) -> QpProblem {
        // variables (dx, dy, dw)
        let mut q = Mat::zeros(3, 3);
        q[(0, 0)] = 1.0;
        let c = Vector::from_vec(vec![3.0, 5.0, 0.0]);
        let e = Mat::from_row_slice(2, 3, &[1.0, 1.0, -1.0, 0.0, 1.0, 2.0]);
        let rhs = Vector::from_vec(vec![0.0, -1.0]);
        let a = Mat::from_row_slice(1, 3, &[-1.0, 0.0, 0.0]);
        let b = Vector::from_vec(vec![1.0]);
        QpProblem::new(q, c)
            .with_equalities(e, rhs)
            .with_inequalities(a, b)
            .with_ball(0, 1, radius_sq)
    }

    #[test]
    fn unconstrained_one_dimensional() {
        let p = QpProblem::new(Mat::from_element(1, 1, 1.0), Vector::from_element(1, 3.0));
        let s = solve_qp(&p).unwrap();
        assert!((s.d[0] + 3.0).abs() < 1e-12);
        assert!((s.value + 4.5).abs() < 1e-12);
    }

    #[test]
    fn problem_two_direction() {
        let s = solve_qp(&problem_two_qp(20.0)).unwrap();
        assert!((s.d[0] - 1.0 / 3.0).abs() < 1e-10, "{}", s.d);
        assert!((s.d[1] + 5.0 / 9.0).abs() < 1e-10);
        assert!((s.d[2] + 2.0 / 9.0).abs() < 1e-10);
        assert_eq!(s.ball_multiplier, 0.0);
        assert!(s.kkt_residual <= 1e-8);
    }

    #[test]
    fn problem_two_with_tight_ball() {
        let s = solve_qp(&problem_two_qp(0.01)).unwrap();
        assert!((s.d[0] - 0.1).abs() < 1e-9, "{}", s.d);
        assert!(s.ball_multiplier > 0.0);
        assert!(s.d[0] * s.d[0] <= 0.01 + 1e-15);
        assert!(s.kkt_residual <= 1e-8);
    }

    #[test]
    fn zero_radius_pins_block() {
        let s = solve_qp(&problem_two_qp(0.0)).unwrap();
        assert_eq!(s.d[0], 0.0);
        assert!((s.d[1] + 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_inequalities() {
        let a = Mat::from_row_slice(2, 1, &[1.0, -1.0]);
        let b = Vector::from_vec(vec![-1.0, -1.0]);
        let p = QpProblem::new(Mat::identity(1, 1), Vector::zeros(1)).with_inequalities(a, b);
        assert!(matches!(solve_qp(&p), Err(MpecError::Infeasible)));
    }

    #[test]
    fn unbounded_linear_objective() {
        let a = Mat::from_row_slice(1, 1, &[1.0]);
        let b = Vector::from_vec(vec![1.0]);
        let p = QpProblem::new(Mat::zeros(1, 1), Vector::from_element(1, 1.0)).with_inequalities(a, b);
        assert!(matches!(solve_qp(&p), Err(MpecError::Unbounded)));
    }

    #[test]
    fn linear_program_vertex() {
        // min -x - y  s.t. x + 2y <= 4, 3x + y <= 6, x, y >= 0  -> (1.6, 1.2)
        let a = Mat::from_row_slice(4, 2, &[1.0, 2.0, 3.0, 1.0, -1.0, 0.0, 0.0, -1.0]);
        let b = Vector::from_vec(vec![4.0, 6.0, 0.0, 0.0]);
        let p = QpProblem::new(Mat::zeros(2, 2), Vector::from_vec(vec![-1.0, -1.0])).with_inequalities(a, b);
        let s = solve_qp(&p).unwrap();
        assert!((s.d[0] - 1.6).abs() < 1e-10 && (s.d[1] - 1.2).abs() < 1e-10);
        assert!(s.kkt_residual < 1e-9);
    }

    #[test]
    fn inconsistent_equalities() {
        let e = Mat::from_row_slice(2, 1, &[1.0, 1.0]);
        let p = QpProblem::new(Mat::identity(1, 1), Vector::zeros(1))
            .with_equalities(e, Vector::from_vec(vec![0.0, 1.0]));
        assert!(matches!(solve_qp(&p), Err(MpecError::Infeasible)));
    }
}
