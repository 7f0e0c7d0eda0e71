//! Ground truth for small instances: global minimization by enumerating the
//! complementarity pieces, finite differences, and a stationarity test on
//! the extreme rays of the tangent cone of `X`.
//!
//! Nothing here calls into the solver modules; the branch linearization of
//! the lower level is rebuilt from scratch so the checks stay independent.

use crate::error::{MpecError, Result};
use crate::implicit::LowerSolution;
use crate::linalg::{hstack, lstsq, min_symmetric_eigenvalue, norm_inf, null_space, rank, Mat, Vector};
use crate::model::{default_tolerance, index_sets, Iterate, MpecEvaluator, MpecInstance};
use crate::par::{self, mask_members, Execution};
use crate::subsolvers::{solve_linear_multi, solve_qp, QpProblem};

/// Largest `m` for piece enumeration.
pub const PIECE_LIMIT: usize = 16;
/// Largest `n` for the extreme-ray test.
pub const RAY_LIMIT: usize = 6;
const GRID_POINTS: usize = 51;
const GRID_DIM_LIMIT: usize = 3;

/// Minimizer on one piece: `w_i = 0` for `i` in `pattern`, `y_i = 0` otherwise.
#[derive(Debug, Clone)]
pub struct PieceSolution {
    pub mask: usize,
    pub pattern: Vec<usize>,
    pub point: Iterate,
    pub value: f64,
    /// Nonconvex piece solved by grid sampling.
    pub approximate: bool,
}

#[derive(Debug, Clone)]
pub struct GlobalSolution {
    pub best: PieceSolution,
    /// Feasible pieces in mask order.
    pub pieces: Vec<PieceSolution>,
}

impl GlobalSolution {
    pub fn approximate(&self) -> bool {
        self.pieces.iter().any(|p| p.approximate)
    }
}

fn piece_problem(inst: &MpecInstance, mask: usize) -> QpProblem {
    let d = inst.dims;
    let (n, m, l) = (d.n, d.m, d.l);
    let dim = n + 2 * m + l;
    let (ax, ay, aw, az, b) = inst.affine_blocks();
    let lower = hstack(&[&ax, &ay, &aw, &az]);
    let mut eq = Mat::zeros(m + l + m, dim);
    eq.view_mut((0, 0), (m + l, dim)).copy_from(&lower);
    let mut eq_rhs = Vector::zeros(m + l + m);
    eq_rhs.rows_mut(0, m + l).copy_from(&(-b));
    let k = inst.upper.g.nrows();
    let mut ineq = Mat::zeros(m + k, dim);
    let mut ineq_rhs = Vector::zeros(m + k);
    for i in 0..m {
        let on_y = mask >> i & 1 == 1;
        // fixed variable in the equality block, sign constraint on the other
        let (fixed, signed) = if on_y { (n + m + i, n + i) } else { (n + i, n + m + i) };
        eq[(m + l + i, fixed)] = 1.0;
        ineq[(i, signed)] = -1.0;
    }
    ineq.view_mut((m, 0), (k, n)).copy_from(&inst.upper.g);
    ineq_rhs.rows_mut(m, k).copy_from(&inst.upper.a);
    QpProblem::new(inst.full_hessian(), inst.full_linear())
        .with_equalities(eq, eq_rhs)
        .with_inequalities(ineq, ineq_rhs)
}

fn objective(inst: &MpecInstance, u: &Vector) -> f64 {
    0.5 * u.dot(&(inst.full_hessian() * u)) + inst.full_linear().dot(u) + inst.objective.c0
}

fn grid_search(inst: &MpecInstance, p: &QpProblem) -> Result<Option<Vector>> {
    let phase1 = QpProblem { q: Mat::zeros(p.dim(), p.dim()), c: Vector::zeros(p.dim()), ..p.clone() };
    let u0 = match solve_qp(&phase1) {
        Ok(s) => s.d,
        Err(MpecError::Infeasible) => return Ok(None),
        Err(e) => return Err(e),
    };
    let z = null_space(&p.eq_mat, 1e-12);
    let k = z.ncols();
    if k > GRID_DIM_LIMIT {
        return Err(MpecError::DimensionTooLarge(k, GRID_DIM_LIMIT));
    }
    let half = 10.0 * (1.0 + u0.amax());
    let step = 2.0 * half / (GRID_POINTS - 1) as f64;
    let mut best: Option<(f64, Vector)> = None;
    let total = GRID_POINTS.pow(k as u32);
    for idx in 0..total {
        let mut t = Vector::zeros(k);
        let mut rest = idx;
        for j in 0..k {
            t[j] = -half + step * (rest % GRID_POINTS) as f64;
            rest /= GRID_POINTS;
        }
        let u = &u0 + &z * t;
        if p.max_violation(&u) > 1e-9 * (1.0 + u.amax()) {
            continue;
        }
        let v = objective(inst, &u);
        if best.as_ref().is_none_or(|(bv, _)| v < *bv) {
            best = Some((v, u));
        }
    }
    Ok(best.map(|(_, u)| u))
}

/// Particular solution of the piece equalities, or `None` when they are
/// inconsistent.
fn particular(p: &QpProblem) -> Option<Vector> {
    let u0 = lstsq(&p.eq_mat, &p.eq_rhs);
    let res = norm_inf(&(&p.eq_mat * &u0 - &p.eq_rhs));
    (res <= 1e-9 * (1.0 + norm_inf(&p.eq_rhs) + u0.amax())).then_some(u0)
}

fn solve_piece(inst: &MpecInstance, mask: usize) -> Result<Option<PieceSolution>> {
    let p = piece_problem(inst, mask);
    let Some(u0) = particular(&p) else { return Ok(None) };
    let z = null_space(&p.eq_mat, 1e-12);
    let h = &p.q;
    // the piece in coordinates t with u = u0 + Z t
    let ht = z.transpose() * h * &z;
    let ht = (&ht + ht.transpose()) * 0.5;
    let convex = z.ncols() == 0 || min_symmetric_eigenvalue(&ht) >= -1e-10 * (1.0 + h.amax());
    let (u, approximate) = if z.ncols() == 0 {
        if p.max_violation(&u0) > 1e-9 * (1.0 + u0.amax()) {
            return Ok(None);
        }
        (u0, false)
    } else if convex {
        let ct = z.transpose() * (h * &u0 + &p.c);
        let reduced = QpProblem::new(ht, ct)
            .with_inequalities(&p.ineq_mat * &z, &p.ineq_rhs - &p.ineq_mat * &u0);
        match solve_qp(&reduced) {
            Ok(s) => (&u0 + &z * s.d, false),
            Err(MpecError::Infeasible) => return Ok(None),
            Err(e) => return Err(e),
        }
    } else {
        match grid_search(inst, &p)? {
            Some(u) => (u, true),
            None => return Ok(None),
        }
    };
    let d = inst.dims;
    let mut point = Iterate::from_stacked(&u, d);
    // the fixed coordinates are exact zeros on the piece
    for i in 0..d.m {
        if mask >> i & 1 == 1 {
            point.w[i] = 0.0;
        } else {
            point.y[i] = 0.0;
        }
    }
    let value = objective(inst, &point.stacked());
    Ok(Some(PieceSolution { mask, pattern: mask_members(mask, d.m), point, value, approximate }))
}

pub fn enumerate_global(inst: &MpecInstance) -> Result<GlobalSolution> {
    enumerate_global_with(inst, Execution::default())
}

/// Solves every piece and returns the smallest value; ties go to the lowest
/// mask.
pub fn enumerate_global_with(inst: &MpecInstance, exec: Execution) -> Result<GlobalSolution> {
    let m = inst.m();
    if m > PIECE_LIMIT {
        return Err(MpecError::DimensionTooLarge(m, PIECE_LIMIT));
    }
    let results = par::map_indexed(exec, 1 << m, |mask| solve_piece(inst, mask));
    let mut pieces = Vec::new();
    for r in results {
        if let Some(p) = r? {
            pieces.push(p);
        }
    }
    let mut best: Option<&PieceSolution> = None;
    for p in &pieces {
        if best.is_none_or(|b| p.value < b.value - 1e-12 * (1.0 + b.value.abs())) {
            best = Some(p);
        }
    }
    let best = best.ok_or(MpecError::NoFeasiblePiece)?.clone();
    Ok(GlobalSolution { best, pieces })
}

/// Central differences per coordinate.
pub fn finite_difference_gradient<F: Fn(&Vector) -> f64>(f: F, point: &Vector, h: f64) -> Vector {
    let mut g = Vector::zeros(point.len());
    let mut p = point.clone();
    for i in 0..point.len() {
        let orig = p[i];
        p[i] = orig + h;
        let up = f(&p);
        p[i] = orig - h;
        let down = f(&p);
        p[i] = orig;
        g[i] = (up - down) / (2.0 * h);
    }
    g
}

/// Central difference of a scalar function at 0.
pub fn central_slope<F: Fn(f64) -> f64>(f: F, h: f64) -> f64 {
    (f(h) - f(-h)) / (2.0 * h)
}

/// Slope of the reduced objective along `d` on one branch of the lower
/// level, built from the full `m x m` system rather than a reduced block.
struct BranchSlope {
    /// `dy = dy_map d`
    dy_map: Mat,
    /// rows that must be `<= 0` for the branch to apply
    cone: Mat,
}

fn branch_slope(inst: &MpecInstance, alpha: &[usize], beta: &[usize], mask: usize) -> Option<BranchSlope> {
    let (_, nm, mm) = inst.lcp_data().ok()?;
    let (n, m) = (inst.n(), inst.m());
    let on_y: Vec<usize> = mask_members(mask, beta.len()).into_iter().map(|k| beta[k]).collect();
    // row i: either (N d + M dy)_i = 0 (y_i free) or dy_i = 0
    let mut t = Mat::zeros(m, m);
    let mut r = Mat::zeros(m, n);
    for i in 0..m {
        if alpha.contains(&i) || on_y.contains(&i) {
            t.set_row(i, &mm.row(i));
            r.set_row(i, &nm.row(i));
        } else {
            t[(i, i)] = 1.0;
        }
    }
    let dy_map = solve_linear_multi(&t, &(-r)).ok()?;
    let dw_map = nm + mm * &dy_map;
    let mut cone = Mat::zeros(beta.len(), n);
    for (k, &i) in beta.iter().enumerate() {
        let row = if on_y.contains(&i) { -dy_map.row(i) } else { -dw_map.row(i) };
        cone.set_row(k, &row);
    }
    Some(BranchSlope { dy_map, cone })
}

/// Generators of `{d : rows d <= 0}`: plus/minus a lineality basis and the
/// extreme rays of the pointed part.
fn cone_generators(rows: &Mat, n: usize) -> Vec<Vector> {
    let lin = if rows.nrows() == 0 { Mat::identity(n, n) } else { null_space(rows, 1e-10) };
    let mut gens: Vec<Vector> = Vec::new();
    for j in 0..lin.ncols() {
        gens.push(lin.column(j).into_owned());
        gens.push(-lin.column(j));
    }
    let k = n - lin.ncols();
    if k == 0 {
        return gens;
    }
    let r = rows.nrows();
    let feasible = |d: &Vector| (rows * d).iter().all(|&v| v <= 1e-10 * d.norm() * (1.0 + rows.amax()));
    for subset in 0..(1usize << r) {
        if subset.count_ones() as usize != k - 1 {
            continue;
        }
        let picked = mask_members(subset, r);
        let mut sys = Mat::zeros(picked.len() + lin.ncols(), n);
        for (i, &row) in picked.iter().enumerate() {
            sys.set_row(i, &rows.row(row));
        }
        for j in 0..lin.ncols() {
            sys.set_row(picked.len() + j, &lin.column(j).transpose());
        }
        if rank(&sys, 1e-10) != n - 1 {
            continue;
        }
        let ns = null_space(&sys, 1e-10);
        if ns.ncols() != 1 {
            continue;
        }
        let d = ns.column(0).into_owned();
        for cand in [d.clone(), -d] {
            if feasible(&cand) {
                gens.push(cand);
            }
        }
    }
    gens
}

/// Minimum over unit generators of every branch cone of the directional
/// derivative of `x -> f(x, ybar(x))`.
pub fn stationarity_gap(inst: &MpecInstance, x: &Vector, sol: &LowerSolution) -> Result<f64> {
    inst.lcp_data()?;
    let n = inst.n();
    if n > RAY_LIMIT {
        return Err(MpecError::DimensionTooLarge(n, RAY_LIMIT));
    }
    let slack = inst.upper.slack(x);
    if slack.iter().enumerate().any(|(i, &s)| s < -1e-9 * (1.0 + inst.upper.a[i].abs())) {
        return Err(MpecError::Precondition("point is outside X".into()));
    }
    let active: Vec<usize> = (0..slack.len()).filter(|&i| slack[i] <= 1e-9 * (1.0 + inst.upper.a[i].abs())).collect();
    let sets = index_sets(&sol.y, &sol.w, default_tolerance(&sol.y, &sol.w))?;
    if sets.beta.len() > PIECE_LIMIT {
        return Err(MpecError::DimensionTooLarge(sets.beta.len(), PIECE_LIMIT));
    }
    let u = Iterate::new(x.clone(), sol.y.clone(), sol.w.clone(), Vector::zeros(0));
    let g = inst.objective_gradient(&u);
    let (_, nm, mm) = inst.lcp_data()?;
    let mut worst = f64::INFINITY;
    for mask in 0..(1usize << sets.beta.len()) {
        let Some(b) = branch_slope(inst, &sets.alpha, &sets.beta, mask) else { continue };
        let mut rows = Mat::zeros(active.len() + b.cone.nrows(), n);
        for (k, &i) in active.iter().enumerate() {
            rows.set_row(k, &inst.upper.g.row(i));
        }
        rows.view_mut((active.len(), 0), (b.cone.nrows(), n)).copy_from(&b.cone);
        for d in cone_generators(&rows, n) {
            let d = &d / d.norm();
            let dy = &b.dy_map * &d;
            let dw = nm * &d + mm * &dy;
            let slope = g.x.dot(&d) + g.y.dot(&dy) + g.w.dot(&dw);
            worst = worst.min(slope);
        }
    }
    Ok(if worst.is_finite() { worst } else { 0.0 })
}

/// True iff no generator of the tangent cone (split by lower-level branch)
/// has a directional derivative below `-tol`.
pub fn tangent_cone_stationarity(inst: &MpecInstance, x: &Vector, sol: &LowerSolution, tol: f64) -> Result<bool> {
    Ok(stationarity_gap(inst, x, sol)? >= -tol)
}
