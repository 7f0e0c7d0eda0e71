//! Penalty interior-point method for the general quadratic-affine form.
//!
//! Each iteration solves a QP in `dx` (the Newton rows for `F` and the
//! centering rows fix `(dy, dw, dz)` as an affine function of `dx`), keeps the
//! step in a ball whose radius shrinks with the infeasibility, and
//! backtracks on the penalty merit `f + alpha * phi` with `phi = ||F||^2 + y'w`.

use serde::{Deserialize, Serialize};

use crate::error::{MpecError, Result};
use crate::implicit::{lower_solve, reduced_stationarity};
use crate::linalg::{diag, hstack, vstack, Mat, Vector};
use crate::model::{
    phi_general, phi_general_gradient, projected_stationarity, Iterate, MpecEvaluator, MpecInstance,
};
use crate::report::{PenaltyBranch, Point, SolveReport, Termination, TraceRow};
use crate::subsolvers::{solve_linear_multi, solve_qp, QpProblem};

pub(crate) const MAX_HALVINGS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipaParams {
    /// Centering parameter in `(0, 1)`.
    pub sigma: f64,
    /// Centrality fraction; chosen from the start point when absent.
    pub p: Option<f64>,
    /// Step-bound coefficient in `||dx||^2 <= c (||F|| + y'w)`.
    pub c: f64,
    pub alpha0: f64,
    pub alpha_growth: f64,
    pub alpha_max: f64,
    pub armijo_rho: f64,
    pub armijo_eta: f64,
    pub tol_phi: f64,
    pub tol_stat: f64,
    /// Threshold on the stationarity measure for a `converged` verdict.
    pub tol_class: f64,
    pub max_iters: usize,
    /// `Q = q_scale * I`; defaults to `(1 + ||Hxx||) I`.
    pub q_scale: Option<f64>,
}

impl Default for PipaParams {
    fn default() -> Self {
        PipaParams {
            sigma: 0.5,
            p: None,
            c: 10.0,
            alpha0: 1.0,
            alpha_growth: 10.0,
            alpha_max: 1e12,
            armijo_rho: 0.5,
            armijo_eta: 1e-4,
            tol_phi: 1e-10,
            tol_stat: 1e-8,
            tol_class: 1e-6,
            max_iters: 200,
            q_scale: None,
        }
    }
}

impl PipaParams {
    pub fn validate(&self) -> Result<()> {
        let open01 = |v: f64| v > 0.0 && v < 1.0;
        let ok = open01(self.sigma)
            && self.p.is_none_or(open01)
            && self.c > 0.0
            && self.alpha0 > 0.0
            && self.alpha_growth > 1.0
            && self.alpha_max >= self.alpha0
            && open01(self.armijo_rho)
            && open01(self.armijo_eta)
            && self.tol_phi > 0.0
            && self.q_scale.is_none_or(|q| q > 0.0);
        if ok {
            Ok(())
        } else {
            Err(MpecError::Precondition("parameter out of range".into()))
        }
    }

    /// `Q_v` for an evaluator: the configured scale, else `1 + ||Hxx||`.
    pub fn q_matrix<E: MpecEvaluator + ?Sized>(&self, eval: &E) -> Mat {
        let n = eval.dims().n;
        let s = self.q_scale.unwrap_or_else(|| 1.0 + eval.curvature_scale().unwrap_or(0.0));
        Mat::identity(n, n) * s
    }
}

/// `min(0.1, 0.9 min_i y_i w_i / mu)`, so the start is centrality feasible.
pub fn default_centrality(u: &Iterate) -> f64 {
    let mu = u.mu();
    if mu <= 0.0 {
        return 0.1;
    }
    let min = u.y.component_mul(&u.w).min();
    (0.9 * min / mu).min(0.1)
}

/// A search direction with the data of the QP that produced it.
#[derive(Debug, Clone)]
pub struct Direction {
    pub d: Iterate,
    /// `grad f' d + 1/2 dx'Q dx` at the solution.
    pub model_value: f64,
    pub ball_radius_sq: f64,
    pub ball_multiplier: f64,
    /// Multipliers of the rows `G (x + dx) <= a`.
    pub upper_multipliers: Vector,
}

impl Direction {
    pub fn norm_dx(&self) -> f64 {
        self.d.x.norm()
    }
}

fn check_interior(u: &Iterate) -> Result<()> {
    if !u.is_interior() {
        return Err(MpecError::Precondition("y and w must be strictly positive".into()));
    }
    Ok(())
}

/// Right-hand side of the linearized rows: Newton rows for `F` and centering
/// rows `W dy + Y dw = -Y w + sigma mu e`.
fn linear_rows<E: MpecEvaluator + ?Sized>(eval: &E, u: &Iterate, sigma: f64) -> (Mat, Mat, Vector) {
    let d = eval.dims();
    let (m, l) = (d.m, d.l);
    let j = eval.lower_jacobian(u);
    let f = eval.lower_residual(u);
    let lower = hstack(&[&j.y, &j.w, &j.z]);
    let centering = hstack(&[&diag(&u.w), &diag(&u.y), &Mat::zeros(m, l)]);
    let block = vstack(&[&lower, &centering]);
    let bx = vstack(&[&j.x, &Mat::zeros(m, d.n)]);
    let target = Vector::from_element(m, sigma * u.mu()) - u.y.component_mul(&u.w);
    let rhs = Vector::from_iterator(m + l + m, (-f).iter().copied().chain(target.iter().copied()));
    (block, bx, rhs)
}

/// Ball radius squared `c (||F|| + y'w)`.
fn ball_radius_sq<E: MpecEvaluator + ?Sized>(eval: &E, u: &Iterate, c: f64) -> f64 {
    c * (eval.lower_residual(u).norm() + u.y.dot(&u.w))
}

/// The direction QP in the full variables `(dx, dy, dw, dz)`: linearized
/// lower-level rows and centering rows as equalities, `x + dx` in `X`, and
/// the ball on `dx`.
pub fn direction_qp<E: MpecEvaluator + ?Sized>(eval: &E, u: &Iterate, qv: &Mat, params: &PipaParams) -> QpProblem {
    let dm = eval.dims();
    let dim = dm.n + 2 * dm.m + dm.l;
    let (block, bx, rhs) = linear_rows(eval, u, params.sigma);
    let eq = hstack(&[&bx, &block]);
    let g = eval.objective_gradient(u);
    let c = Vector::from_iterator(dim, g.x.iter().chain(g.y.iter()).chain(g.w.iter()).chain(g.z.iter()).copied());
    let mut q = Mat::zeros(dim, dim);
    q.view_mut((0, 0), (dm.n, dm.n)).copy_from(qv);
    let upper = eval.upper_set();
    let ineq = hstack(&[&upper.g, &Mat::zeros(upper.g.nrows(), dim - dm.n)]);
    QpProblem::new(q, c)
        .with_equalities(eq, rhs)
        .with_inequalities(ineq, upper.slack(&u.x))
        .with_ball(0, dm.n, ball_radius_sq(eval, u, params.c))
}

/// Solves the direction QP by eliminating `(dy, dw, dz)` through the
/// linearized lower block and solving the remaining QP in `dx`.
pub fn pipa_direction<E: MpecEvaluator + ?Sized>(eval: &E, u: &Iterate, qv: &Mat, params: &PipaParams) -> Result<Direction> {
    check_interior(u)?;
    let dm = eval.dims();
    let (block, bx, rhs) = linear_rows(eval, u, params.sigma);
    let mut rhs_all = Mat::zeros(rhs.len(), dm.n + 1);
    rhs_all.set_column(0, &rhs);
    rhs_all.view_mut((0, 1), (rhs.len(), dm.n)).copy_from(&(-bx));
    let sol = solve_linear_multi(&block, &rhs_all).map_err(|e| match e {
        MpecError::Singular => MpecError::SingularLowerBlock,
        other => other,
    })?;
    let v0 = sol.column(0).into_owned();
    let vmap = sol.columns(1, dm.n).into_owned();

    let g = eval.objective_gradient(u);
    let gv = Vector::from_iterator(2 * dm.m + dm.l, g.y.iter().chain(g.w.iter()).chain(g.z.iter()).copied());
    let c = &g.x + vmap.transpose() * &gv;
    let offset = gv.dot(&v0);
    let upper = eval.upper_set();
    let radius_sq = ball_radius_sq(eval, u, params.c);
    let p = QpProblem::new(qv.clone(), c)
        .with_inequalities(upper.g.clone(), upper.slack(&u.x))
        .with_ball(0, dm.n, radius_sq);
    let qp = solve_qp(&p)?;
    let v = &v0 + &vmap * &qp.d;
    let d = Iterate::new(
        qp.d.clone(),
        v.rows(0, dm.m).into_owned(),
        v.rows(dm.m, dm.m).into_owned(),
        v.rows(2 * dm.m, dm.l).into_owned(),
    );
    Ok(Direction {
        d,
        model_value: qp.value + offset,
        ball_radius_sq: radius_sq,
        ball_multiplier: qp.ball_multiplier,
        upper_multipliers: qp.ineq_multipliers,
    })
}

/// `sup { t >= 0 : a s^2 + b s + c >= 0 for all s in [0, t] }`.
pub(crate) fn first_exit(a: f64, b: f64, c: f64) -> f64 {
    let q = |t: f64| (a * t + b) * t + c;
    let mut roots = Vec::with_capacity(2);
    if a == 0.0 {
        if b != 0.0 {
            roots.push(-c / b);
        }
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc >= 0.0 {
            let s = disc.sqrt();
            let qq = -0.5 * (b + if b >= 0.0 { s } else { -s });
            roots.push(qq / a);
            if qq != 0.0 {
                roots.push(c / qq);
            }
        }
    }
    roots.retain(|r| r.is_finite() && *r > 0.0);
    roots.sort_by(f64::total_cmp);
    let mut lo = 0.0;
    for r in roots {
        if q(0.5 * (lo + r)) < 0.0 {
            return lo;
        }
        lo = r;
    }
    if q(2.0 * lo + 1.0) < 0.0 {
        return lo;
    }
    f64::INFINITY
}

/// Largest `t` keeping `y + s dy > 0` and `w + s dw > 0` on `[0, t)`.
pub(crate) fn positivity_bound(u: &Iterate, d: &Iterate) -> f64 {
    let mut t = f64::INFINITY;
    for (v, dv) in u.y.iter().zip(d.y.iter()).chain(u.w.iter().zip(d.w.iter())) {
        if *dv < 0.0 {
            t = t.min(-v / dv);
        }
    }
    t
}

/// Largest `t` keeping `y_i(s) w_i(s) >= p mu(s)` on `[0, t]`, from the exact
/// quadratic expansion of each product.
pub(crate) fn centrality_bound(u: &Iterate, d: &Iterate, p: f64) -> f64 {
    let m = u.y.len();
    if m == 0 {
        return f64::INFINITY;
    }
    let c0 = u.y.component_mul(&u.w);
    let c1 = u.y.component_mul(&d.w) + u.w.component_mul(&d.y);
    let c2 = d.y.component_mul(&d.w);
    let (s0, s1, s2) = (c0.sum() / m as f64, c1.sum() / m as f64, c2.sum() / m as f64);
    let mut t = f64::INFINITY;
    for i in 0..m {
        let mut c = c0[i] - p * s0;
        // an accepted step can land on the boundary; absorb the rounding there
        if c < 0.0 && c >= -1e-13 * c0[i].abs().max(s0) {
            c = 0.0;
        }
        t = t.min(first_exit(c2[i] - p * s2, c1[i] - p * s1, c));
    }
    t
}

#[derive(Debug, Clone)]
pub struct LineSearchOutcome {
    pub tau: f64,
    pub tau_max: f64,
    pub next: Iterate,
}

/// Backtracking `tau = rho^k <= tau_max` on the four acceptance conditions:
/// positivity, centrality, `phi` decrease and penalty-merit decrease.
pub fn pipa_linesearch<E: MpecEvaluator + ?Sized>(
    eval: &E,
    u: &Iterate,
    dir: &Direction,
    alpha: f64,
    params: &PipaParams,
) -> Result<LineSearchOutcome> {
    let d = &dir.d;
    if d.stacked().iter().all(|&v| v == 0.0) {
        return Err(MpecError::Precondition("zero direction".into()));
    }
    let p = params.p.unwrap_or_else(|| default_centrality(u));
    let pos = positivity_bound(u, d);
    let cen = centrality_bound(u, d, p);
    let tau_max = if pos <= cen.min(1.0) { 0.99 * pos } else { cen.min(1.0) };
    if tau_max < 1e-14 {
        return Err(MpecError::NoAdmissibleStep);
    }
    let phi0 = phi_general(eval, u)?;
    let merit0 = eval.objective_value(u) + alpha * phi0;
    let slope = eval.objective_gradient(u).dot(d) + alpha * phi_general_gradient(eval, u).dot(d);
    let decrease = -slope;
    let mut tau = 1.0;
    while tau > tau_max {
        tau *= params.armijo_rho;
    }
    for _ in 0..=MAX_HALVINGS {
        let next = u.step(d, tau);
        if accepts(eval, u, &next, tau, p, phi0, merit0, decrease, alpha, params) {
            return Ok(LineSearchOutcome { tau, tau_max, next });
        }
        tau *= params.armijo_rho;
    }
    Err(MpecError::LineSearchFailed(MAX_HALVINGS))
}

#[allow(clippy::too_many_arguments)]
fn accepts<E: MpecEvaluator + ?Sized>(
    eval: &E,
    _u: &Iterate,
    next: &Iterate,
    tau: f64,
    p: f64,
    phi0: f64,
    merit0: f64,
    decrease: f64,
    alpha: f64,
    params: &PipaParams,
) -> bool {
    if !next.is_interior() {
        return false;
    }
    let mu = next.mu();
    let prod = next.y.component_mul(&next.w);
    if prod.iter().any(|&v| v < p * mu - 1e-14 * mu) {
        return false;
    }
    let Ok(phi) = phi_general(eval, next) else { return false };
    if phi > (1.0 - params.armijo_eta * tau * (1.0 - params.sigma)) * phi0 {
        return false;
    }
    let merit = eval.objective_value(next) + alpha * phi;
    merit <= merit0 - params.armijo_eta * tau * decrease
}

/// Raises `alpha` until `d` is a sufficient descent direction for the merit.
/// Returns the new value and whether it changed.
pub(crate) fn update_penalty(alpha: f64, f_slope: f64, phi_slope: f64, phi: f64, params: &PipaParams) -> f64 {
    let mut a = alpha;
    while f_slope + a * phi_slope > -params.armijo_eta * phi && a < params.alpha_max {
        a = (a * params.alpha_growth).min(params.alpha_max);
    }
    a
}

/// Recovers the lower-level-feasible point `(x, ybar(x))` of an LCP instance
/// and classifies it with the reduced stationarity measure; general
/// instances are classified with the multiplier-fit residual.
pub(crate) fn classify_terminal(inst: &MpecInstance, u: &Iterate, tol: f64, report: &mut SolveReport) -> Result<bool> {
    report.raw_value = Some(inst.objective_value(u));
    if inst.is_lcp() {
        let sol = lower_solve(inst, &u.x)?;
        report.lower_solves += 1;
        let feasible = sol.iterate(&u.x);
        report.final_point = Point::from(&feasible);
        report.final_value = inst.objective_value(&feasible);
        let (s, sol) = reduced_stationarity(inst, &u.x)?;
        report.lower_solves += 1;
        report.stationarity_residual = Some(s);
        report.degenerate_terminal = !sol.sets.beta.is_empty();
        report.classification_tol = tol;
        Ok(s <= tol)
    } else {
        report.final_point = Point::from(u);
        report.final_value = inst.objective_value(u);
        let s = projected_stationarity(inst, u);
        report.stationarity_residual = Some(s);
        report.classification_tol = tol;
        Ok(s <= tol)
    }
}

fn check_start<E: MpecEvaluator + ?Sized>(eval: &E, start: &Iterate, p: f64) -> Result<()> {
    if start.dims() != eval.dims() {
        return Err(MpecError::Dimension("start point dimensions do not match the instance".into()));
    }
    check_interior(start)?;
    if !eval.upper_set().contains(&start.x, 1e-10) {
        return Err(MpecError::Precondition("start point is outside X".into()));
    }
    let mu = start.mu();
    if start.y.component_mul(&start.w).iter().any(|&v| v < p * mu) {
        return Err(MpecError::Precondition("start point violates centrality".into()));
    }
    Ok(())
}

/// Core loop shared by the instance and evaluator entry points. Returns the
/// report (without terminal classification) and the last iterate.
pub fn pipa_iterate<E: MpecEvaluator + ?Sized>(eval: &E, start: &Iterate, params: &PipaParams) -> Result<(SolveReport, Iterate)> {
    params.validate()?;
    let p = params.p.unwrap_or_else(|| default_centrality(start));
    check_start(eval, start, p)?;
    let params = PipaParams { p: Some(p), ..*params };
    let qv = params.q_matrix(eval);
    let mut u = start.clone();
    let mut alpha = params.alpha0;
    let mut report = SolveReport::new("pipa", start);
    let mut status = Termination::MaxIterations;
    for iter in 0..=params.max_iters {
        let phi = phi_general(eval, &u)?;
        let f = eval.objective_value(&u);
        let mut row = TraceRow {
            iter,
            phi,
            p_alpha: Some(f + alpha * phi),
            alpha: Some(alpha),
            mu: u.mu(),
            ..Default::default()
        };
        if iter == params.max_iters {
            row.status = "max_iters".into();
            report.trace.push(row);
            break;
        }
        let dir = pipa_direction(eval, &u, &qv, &params)?;
        row.norm_dx = dir.norm_dx();
        if phi <= params.tol_phi && -dir.model_value <= params.tol_stat {
            row.status = "feasible".into();
            report.trace.push(row);
            status = Termination::Converged;
            break;
        }
        let f_slope = eval.objective_gradient(&u).dot(&dir.d);
        let phi_slope = phi_general_gradient(eval, &u).dot(&dir.d);
        let new_alpha = update_penalty(alpha, f_slope, phi_slope, phi, &params);
        if new_alpha != alpha {
            report.penalty_updates.push(iter);
            alpha = new_alpha;
            row.alpha = Some(alpha);
            row.p_alpha = Some(f + alpha * phi);
        }
        match pipa_linesearch(eval, &u, &dir, alpha, &params) {
            Ok(ls) => {
                row.tau = Some(ls.tau);
                row.status = "step".into();
                report.trace.push(row);
                u = ls.next;
                report.iterations += 1;
            }
            Err(MpecError::LineSearchFailed(_)) | Err(MpecError::NoAdmissibleStep) => {
                row.status = "line_search_failed".into();
                report.trace.push(row);
                status = Termination::LineSearchFailed;
                break;
            }
            Err(e) => return Err(e),
        }
    }
    report.status = status;
    report.final_phi = phi_general(eval, &u)?;
    report.final_alpha = Some(alpha);
    report.penalty_branch = Some(if alpha >= params.alpha_max { PenaltyBranch::Unbounded } else { PenaltyBranch::Bounded });
    report.final_point = Point::from(&u);
    report.final_value = eval.objective_value(&u);
    Ok((report, u))
}

/// Runs the method on a loaded instance and classifies the end point.
pub fn pipa_solve(inst: &MpecInstance, start: &Iterate, params: &PipaParams) -> Result<SolveReport> {
    let (mut report, u) = pipa_iterate(inst, start, params)?;
    let stationary = classify_terminal(inst, &u, params.tol_class, &mut report)?;
    if report.status == Termination::Converged && !stationary {
        report.status = Termination::PossibleNonstationary;
    }
    Ok(report)
}

/// Runs the method on an in-process evaluator; the end point is classified by
/// the multiplier-fit residual.
pub fn pipa_solve_evaluator<E: MpecEvaluator + ?Sized>(eval: &E, start: &Iterate, params: &PipaParams) -> Result<SolveReport> {
    let (mut report, u) = pipa_iterate(eval, start, params)?;
    let s = projected_stationarity(eval, &u);
    report.stationarity_residual = Some(s);
    report.classification_tol = params.tol_class;
    if report.status == Termination::Converged && s > params.tol_class {
        report.status = Termination::PossibleNonstationary;
    }
    Ok(report)
}
