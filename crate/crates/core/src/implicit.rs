//! Descent on the reduced objective `x -> f(x, ybar(x))` for instances with
//! an LCP lower level. Directions come from a piecewise-quadratic model
//! whose pieces are the branches of the directional LCP on the degenerate
//! set; steps follow the equilibrium path with Armijo backtracking.

use serde::{Deserialize, Serialize};

use crate::error::{MpecError, Result};
use crate::linalg::{select_cols, select_rows, Mat, Vector};
use crate::model::{default_tolerance, index_sets, IndexSets, Iterate, MpecEvaluator, MpecInstance};
use crate::par::{self, mask_members, Execution};
use crate::report::{Point, SolveReport, Termination, TraceRow};
use crate::subsolvers::{solve_lcp_with, solve_linear_multi, solve_qp, QpProblem, ENUMERATION_LIMIT};

const MAX_HALVINGS: usize = 60;

#[derive(Debug, Clone, PartialEq)]
pub struct LowerSolution {
    pub y: Vector,
    pub w: Vector,
    pub sets: IndexSets,
}

impl LowerSolution {
    pub fn iterate(&self, x: &Vector) -> Iterate {
        Iterate::new(x.clone(), self.y.clone(), self.w.clone(), Vector::zeros(0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImplicitParams {
    /// `Q = q_scale * I` in the direction subproblem.
    pub q_scale: f64,
    pub armijo_rho: f64,
    pub armijo_eta: f64,
    /// Stop once the subproblem value is at least `-tol_stat`.
    pub tol_stat: f64,
    pub max_iters: usize,
}

impl Default for ImplicitParams {
    fn default() -> Self {
        ImplicitParams { q_scale: 1.0, armijo_rho: 0.5, armijo_eta: 1e-4, tol_stat: 1e-13, max_iters: 200 }
    }
}

/// `ybar(x)`: the solution of `y >= 0, w = q + N x + M y >= 0, y'w = 0`.
pub fn lower_solve(inst: &MpecInstance, x: &Vector) -> Result<LowerSolution> {
    lower_solve_with(inst, x, Execution::default())
}

pub fn lower_solve_with(inst: &MpecInstance, x: &Vector, exec: Execution) -> Result<LowerSolution> {
    let (q, n, m) = inst.lcp_data()?;
    let sol = solve_lcp_with(m, &(q + n * x), exec)?;
    let sets = index_sets(&sol.y, &sol.w, default_tolerance(&sol.y, &sol.w))?;
    Ok(LowerSolution { y: sol.y, w: sol.w, sets })
}

/// Linearization of the solution map on one branch: `S` (a subset of the
/// degenerate set, given by `mask`) joins `alpha` on the side where `dw = 0`.
#[derive(Debug, Clone)]
pub struct Branch {
    pub mask: usize,
    /// `dy = dy_map * dx`.
    pub dy_map: Mat,
    /// `dw = dw_map * dx`.
    pub dw_map: Mat,
    /// Validity cone `cone * dx <= 0` (`dy_S >= 0`, `dw_{beta \ S} >= 0`).
    pub cone: Mat,
}

fn branch(inst: &MpecInstance, sets: &IndexSets, mask: usize) -> Option<Branch> {
    let (_, nm, mm) = inst.lcp_data().ok()?;
    let (m, n) = (inst.m(), inst.n());
    let beta = &sets.beta;
    let chosen: Vec<usize> = mask_members(mask, beta.len()).into_iter().map(|k| beta[k]).collect();
    let mut free: Vec<usize> = sets.alpha.iter().chain(chosen.iter()).copied().collect();
    free.sort_unstable();
    let mut dy_map = Mat::zeros(m, n);
    if !free.is_empty() {
        let maa = select_cols(&select_rows(mm, &free), &free);
        let na = select_rows(nm, &free);
        let sol = solve_linear_multi(&maa, &(-na)).ok()?;
        for (k, &i) in free.iter().enumerate() {
            dy_map.set_row(i, &sol.row(k));
        }
    }
    let dw_map = nm + mm * &dy_map;
    let rest: Vec<usize> = beta.iter().copied().filter(|i| !chosen.contains(i)).collect();
    let mut cone = Mat::zeros(chosen.len() + rest.len(), n);
    for (r, &i) in chosen.iter().enumerate() {
        cone.set_row(r, &(-dy_map.row(i)));
    }
    for (r, &i) in rest.iter().enumerate() {
        cone.set_row(chosen.len() + r, &(-dw_map.row(i)));
    }
    Some(Branch { mask, dy_map, dw_map, cone })
}

fn check_beta(sets: &IndexSets) -> Result<()> {
    if sets.beta.len() > ENUMERATION_LIMIT {
        return Err(MpecError::DimensionTooLarge(sets.beta.len(), ENUMERATION_LIMIT));
    }
    Ok(())
}

/// Directional derivative `ybar'(x; dx)` by enumerating the branches of the
/// directional LCP on the degenerate set; the lowest feasible branch wins.
pub fn lower_directional_derivative(inst: &MpecInstance, _x: &Vector, sol: &LowerSolution, dx: &Vector) -> Result<Vector> {
    inst.lcp_data()?;
    check_beta(&sol.sets)?;
    let scale = 1e-10 * (1.0 + dx.amax());
    let found = par::find_first(Execution::Sequential, 1 << sol.sets.beta.len(), |mask| {
        let b = branch(inst, &sol.sets, mask)?;
        let ok = (&b.cone * dx).iter().all(|&v| v <= scale * (1.0 + b.cone.amax()));
        ok.then(|| &b.dy_map * dx)
    });
    found.map(|(_, dy)| dy).ok_or(MpecError::NoBranchFeasible)
}

/// Gradient of the reduced model on a branch: `grad_x f + Dy' grad_y f + Dw' grad_w f`.
fn reduced_gradient(inst: &MpecInstance, x: &Vector, sol: &LowerSolution, b: &Branch) -> Vector {
    let g = inst.objective_gradient(&sol.iterate(x));
    &g.x + b.dy_map.transpose() * &g.y + b.dw_map.transpose() * &g.w
}

#[derive(Debug, Clone)]
pub struct SubproblemSolution {
    pub dx: Vector,
    pub value: f64,
    /// Winning branch as a bitmask over the degenerate set.
    pub branch: usize,
    pub branches_solved: usize,
}

pub fn direction_subproblem(inst: &MpecInstance, x: &Vector, sol: &LowerSolution, qmat: &Mat) -> Result<SubproblemSolution> {
    direction_subproblem_with(inst, x, sol, qmat, Execution::default())
}

/// Global minimum of `grad_x f' dx + grad_y f' ybar'(x; dx) + 1/2 dx'Q dx`
/// over `x + dx` in `X`, one convex QP per branch.
pub fn direction_subproblem_with(
    inst: &MpecInstance,
    x: &Vector,
    sol: &LowerSolution,
    qmat: &Mat,
    exec: Execution,
) -> Result<SubproblemSolution> {
    inst.lcp_data()?;
    check_beta(&sol.sets)?;
    let n = inst.n();
    let slack = inst.upper.slack(x);
    let count = 1usize << sol.sets.beta.len();
    let results = par::map_indexed(exec, count, |mask| -> Option<Result<(Vector, f64)>> {
        let b = branch(inst, &sol.sets, mask)?;
        let c = reduced_gradient(inst, x, sol, &b);
        let k = inst.upper.g.nrows();
        let mut a = Mat::zeros(k + b.cone.nrows(), n);
        a.view_mut((0, 0), (k, n)).copy_from(&inst.upper.g);
        a.view_mut((k, 0), (b.cone.nrows(), n)).copy_from(&b.cone);
        let mut rhs = Vector::zeros(a.nrows());
        rhs.rows_mut(0, k).copy_from(&slack.map(|s| s.max(0.0)));
        let p = QpProblem::new(qmat.clone(), c).with_inequalities(a, rhs);
        Some(solve_qp(&p).map(|s| (s.d, s.value)))
    });
    let mut best: Option<SubproblemSolution> = None;
    let mut solved = 0;
    for (mask, r) in results.into_iter().enumerate() {
        let Some(r) = r else { continue };
        let (dx, value) = match r {
            Ok(v) => v,
            Err(MpecError::Infeasible) => continue,
            Err(e) => return Err(e),
        };
        solved += 1;
        let better = match &best {
            None => true,
            Some(bst) => value < bst.value - 1e-14 * (1.0 + bst.value.abs()),
        };
        if better {
            best = Some(SubproblemSolution { dx, value, branch: mask, branches_solved: 0 });
        }
    }
    let mut best = best.ok_or(MpecError::NoBranchFeasible)?;
    best.branches_solved = solved;
    Ok(best)
}

/// Reduced objective `f(x, ybar(x))` at a lower-level solution.
pub fn reduced_value(inst: &MpecInstance, x: &Vector, sol: &LowerSolution) -> f64 {
    inst.objective_value(&sol.iterate(x))
}

#[derive(Debug, Clone)]
pub struct PathStep {
    pub tau: f64,
    pub x: Vector,
    pub sol: LowerSolution,
    pub value: f64,
    pub lower_solves: usize,
}

/// Armijo backtracking along `tau -> (x + tau dx, ybar(x + tau dx))`.
pub fn equilibrium_path_linesearch(
    inst: &MpecInstance,
    x: &Vector,
    sol: &LowerSolution,
    dx: &Vector,
    value: f64,
    params: &ImplicitParams,
) -> Result<PathStep> {
    if value >= 0.0 {
        return Err(MpecError::Precondition("line search needs a negative subproblem value".into()));
    }
    let f0 = reduced_value(inst, x, sol);
    let mut tau = 1.0;
    for k in 0..=MAX_HALVINGS {
        let xt = x + dx * tau;
        let st = lower_solve(inst, &xt)?;
        let ft = reduced_value(inst, &xt, &st);
        if ft <= f0 + params.armijo_eta * tau * value {
            return Ok(PathStep { tau, x: xt, sol: st, value: ft, lower_solves: k + 1 });
        }
        tau *= params.armijo_rho;
    }
    Err(MpecError::LineSearchFailed(MAX_HALVINGS))
}

/// `sqrt(2 max(0, -value))`: the size of the model decrease expressed in the
/// units of a projected gradient.
pub fn stationarity_measure(value: f64) -> f64 {
    (2.0 * (-value).max(0.0)).sqrt()
}

/// Stationarity measure of the reduced problem at `x` (subproblem with `Q = I`).
pub fn reduced_stationarity(inst: &MpecInstance, x: &Vector) -> Result<(f64, LowerSolution)> {
    let sol = lower_solve(inst, x)?;
    let q = Mat::identity(inst.n(), inst.n());
    let sub = direction_subproblem(inst, x, &sol, &q)?;
    Ok((stationarity_measure(sub.value), sol))
}

pub fn implicit_solve(inst: &MpecInstance, x0: &Vector, params: &ImplicitParams) -> Result<SolveReport> {
    inst.lcp_data()?;
    if x0.len() != inst.n() {
        return Err(MpecError::Dimension("start point has the wrong length".into()));
    }
    if !inst.upper.contains(x0, 1e-10) {
        return Err(MpecError::Precondition("start point is outside X".into()));
    }
    let qmat = Mat::identity(inst.n(), inst.n()) * params.q_scale;
    let mut x = x0.clone();
    let mut sol = lower_solve(inst, &x)?;
    let mut report = SolveReport::new("implicit", &sol.iterate(&x));
    report.lower_solves = 1;
    let mut fx = reduced_value(inst, &x, &sol);
    let mut last_value = f64::NAN;
    report.status = Termination::MaxIterations;
    for iter in 0..=params.max_iters {
        let sub = direction_subproblem(inst, &x, &sol, &qmat)?;
        last_value = sub.value;
        let mut row = TraceRow {
            iter,
            phi: 0.0,
            p_alpha: Some(fx),
            mu: 0.0,
            norm_dx: sub.dx.norm(),
            subproblem_value: Some(sub.value),
            beta_size: Some(sol.sets.beta.len()),
            ..Default::default()
        };
        if sub.value >= -params.tol_stat {
            row.status = "stationary".into();
            row.lower_solves = Some(report.lower_solves);
            report.trace.push(row);
            report.status = Termination::Converged;
            break;
        }
        if iter == params.max_iters {
            row.status = "max_iters".into();
            row.lower_solves = Some(report.lower_solves);
            report.trace.push(row);
            break;
        }
        match equilibrium_path_linesearch(inst, &x, &sol, &sub.dx, sub.value, params) {
            Ok(step) => {
                report.lower_solves += step.lower_solves;
                row.tau = Some(step.tau);
                row.status = "step".into();
                row.lower_solves = Some(report.lower_solves);
                report.trace.push(row);
                x = step.x;
                sol = step.sol;
                fx = step.value;
                report.iterations += 1;
            }
            Err(MpecError::LineSearchFailed(_)) => {
                report.lower_solves += MAX_HALVINGS + 1;
                row.status = "line_search_failed".into();
                row.lower_solves = Some(report.lower_solves);
                report.trace.push(row);
                report.status = Termination::LineSearchFailed;
                break;
            }
            Err(e) => return Err(e),
        }
    }
    let u = sol.iterate(&x);
    report.final_point = Point::from(&u);
    report.final_value = fx;
    report.final_phi = 0.0;
    report.stationarity_residual = Some(stationarity_measure(last_value));
    report.classification_tol = stationarity_measure(-params.tol_stat);
    report.degenerate_terminal = !sol.sets.beta.is_empty();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::problem3;

    fn v(x: f64) -> Vector {
        Vector::from_element(1, x)
    }

    #[test]
    fn lower_level_is_max() {
        let inst = problem3();
        let s = lower_solve(&inst, &v(0.7)).unwrap();
        assert!((s.y[0] - 0.7).abs() < 1e-15 && s.w[0] == 0.0);
        let s = lower_solve(&inst, &v(-0.3)).unwrap();
        assert!(s.y[0] == 0.0 && (s.w[0] - 0.3).abs() < 1e-15);
        let s = lower_solve(&inst, &v(0.0)).unwrap();
        assert_eq!(s.sets.beta, vec![0]);
    }

    #[test]
    fn derivative_at_kink() {
        let inst = problem3();
        let s = lower_solve(&inst, &v(0.0)).unwrap();
        for dx in [-2.0, -0.5, 0.0, 0.3, 1.5] {
            let dy = lower_directional_derivative(&inst, &v(0.0), &s, &v(dx)).unwrap();
            assert!((dy[0] - dx.max(0.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn subproblem_at_kink() {
        let inst = problem3();
        let s = lower_solve(&inst, &v(0.0)).unwrap();
        let sub = direction_subproblem(&inst, &v(0.0), &s, &Mat::from_element(1, 1, 2.0)).unwrap();
        assert!((sub.dx[0] - 0.5).abs() < 1e-12);
        assert!((sub.value + 0.25).abs() < 1e-12);
        assert_eq!(sub.branch, 1);
    }

    #[test]
    fn path_search_takes_full_step() {
        let inst = problem3();
        let s = lower_solve(&inst, &v(0.0)).unwrap();
        let step = equilibrium_path_linesearch(&inst, &v(0.0), &s, &v(0.5), -0.25, &ImplicitParams::default()).unwrap();
        assert_eq!(step.tau, 1.0);
        assert!((step.value + 0.25).abs() < 1e-15);
        assert!(equilibrium_path_linesearch(&inst, &v(0.0), &s, &v(0.5), 0.0, &ImplicitParams::default()).is_err());
    }

    #[test]
    fn solves_problem_three() {
        let inst = problem3();
        let r = implicit_solve(&inst, &v(0.0), &ImplicitParams::default()).unwrap();
        assert_eq!(r.status, Termination::Converged);
        assert!((r.final_value + 0.25).abs() < 1e-8);
        assert!(r.lower_solves >= r.iterations);
        let r = implicit_solve(&inst, &v(0.5), &ImplicitParams::default()).unwrap();
        assert_eq!(r.iterations, 0);
        assert_eq!(r.status, Termination::Converged);
    }
}
