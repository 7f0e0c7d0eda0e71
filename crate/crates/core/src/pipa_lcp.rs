//! Interior-point penalty method for a monotone LCP lower level
//! `w = q + N x + M y`, with infeasibility `phi = y'w + ||r||`.
//!
//! Along the step `u + tau d` the residual and the complementarity products
//! are exact polynomials in `tau`, so the largest admissible step (positivity,
//! centrality, limited complementarity decrease) is found from scalar
//! quadratics; Armijo backtracking on the merit then runs inside it.

use serde::{Deserialize, Serialize};

use crate::error::{MpecError, Result};
use crate::linalg::{norm_inf, Mat, Vector};
use crate::model::{lcp_residual, phi_lcp, Iterate, MpecEvaluator, MpecInstance};
use crate::pipa::{
    centrality_bound, classify_terminal, default_centrality, pipa_direction, positivity_bound, update_penalty, Direction,
    PipaParams, MAX_HALVINGS,
};
use crate::report::{PenaltyBranch, Point, SolveReport, Termination, TraceRow};

/// Same parameter set as the general method.
pub type LcpPipaParams = PipaParams;

/// Direction from the QP with rows `N dx + M dy - dw = -r`, the centering
/// rows, `x + dx` in `X` and `||dx||^2 <= c phi`.
pub fn lcp_pipa_direction(inst: &MpecInstance, u: &Iterate, qv: &Mat, params: &LcpPipaParams) -> Result<Direction> {
    inst.lcp_data()?;
    pipa_direction(inst, u, qv, params)
}

/// Base point and direction with the products that appear in the arc
/// expansions.
#[derive(Debug, Clone)]
pub struct ArcState<'a> {
    pub inst: &'a MpecInstance,
    pub base: Iterate,
    pub dir: Iterate,
    pub sigma: f64,
    pub mu: f64,
    /// `w'y`
    pub wy: f64,
    /// `dw'dy`
    pub dwdy: f64,
    /// `w o y`
    pub prod: Vector,
    /// `w o dy + y o dw`
    pub cross: Vector,
    /// `dw o dy`
    pub dprod: Vector,
    /// Residual at the base point.
    pub r0: Vector,
}

impl<'a> ArcState<'a> {
    pub fn new(inst: &'a MpecInstance, base: &Iterate, dir: &Iterate, sigma: f64) -> Result<Self> {
        let r0 = lcp_residual(inst, &base.x, &base.y, &base.w)?;
        Ok(ArcState {
            inst,
            base: base.clone(),
            dir: dir.clone(),
            sigma,
            mu: base.mu(),
            wy: base.w.dot(&base.y),
            dwdy: dir.w.dot(&dir.y),
            prod: base.w.component_mul(&base.y),
            cross: base.w.component_mul(&dir.y) + base.y.component_mul(&dir.w),
            dprod: dir.w.component_mul(&dir.y),
            r0,
        })
    }

    pub fn point(&self, tau: f64) -> Iterate {
        self.base.step(&self.dir, tau)
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(MpecError::Precondition("tau must lie in [0, 1]".into()));
    }
    Ok(())
}

/// `r` at `u + tau d`, checked against `(1 - tau) r`.
pub fn residual_on_arc(arc: &ArcState, tau: f64) -> Result<Vector> {
    check_tau(tau)?;
    let p = arc.point(tau);
    let r = lcp_residual(arc.inst, &p.x, &p.y, &p.w)?;
    let expect = &arc.r0 * (1.0 - tau);
    let scale = 1.0 + norm_inf(&arc.r0) + norm_inf(&arc.base.stacked()) + norm_inf(&arc.dir.stacked());
    let err = norm_inf(&(&r - &expect));
    if err > 1e-12 * scale {
        return Err(MpecError::IdentityViolated { what: "residual", err });
    }
    Ok(r)
}

/// `w(tau) o y(tau)`, checked against
/// `(1 - tau) w o y + tau sigma mu e + tau^2 dw o dy`.
pub fn complementarity_on_arc(arc: &ArcState, tau: f64) -> Result<Vector> {
    check_tau(tau)?;
    let p = arc.point(tau);
    let actual = p.w.component_mul(&p.y);
    let expect = &arc.prod * (1.0 - tau) + Vector::from_element(arc.prod.len(), tau * arc.sigma * arc.mu) + &arc.dprod * (tau * tau);
    let scale = 1.0 + norm_inf(&arc.prod) + norm_inf(&arc.cross) + norm_inf(&arc.dprod);
    let err = norm_inf(&(&actual - &expect));
    if err > 1e-12 * scale {
        return Err(MpecError::IdentityViolated { what: "complementarity", err });
    }
    Ok(actual)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Binding {
    None,
    Positivity,
    Centrality,
    Complementarity,
}

impl Binding {
    pub fn as_str(self) -> &'static str {
        match self {
            Binding::None => "none",
            Binding::Positivity => "positivity",
            Binding::Centrality => "centrality",
            Binding::Complementarity => "complementarity",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepBound {
    pub tau_max: f64,
    pub binding: Binding,
}

/// Largest `tau` in `(0, 1]` keeping positivity, `y_i w_i >= p mu` and
/// `w(tau)'y(tau) >= (1 - tau) w'y`; the last reduces to
/// `sigma w'y + tau dw'dy >= 0`.
pub fn max_step(arc: &ArcState, p: f64) -> Result<StepBound> {
    let pos = positivity_bound(&arc.base, &arc.dir);
    let cen = centrality_bound(&arc.base, &arc.dir, p);
    let comp = if arc.dwdy < 0.0 { arc.sigma * arc.wy / -arc.dwdy } else { f64::INFINITY };
    let mut bound = StepBound { tau_max: 1.0, binding: Binding::None };
    if cen < bound.tau_max {
        bound = StepBound { tau_max: cen, binding: Binding::Centrality };
    }
    if comp < bound.tau_max {
        bound = StepBound { tau_max: comp, binding: Binding::Complementarity };
    }
    if pos <= bound.tau_max {
        // positivity must hold strictly, so stop short of the root
        bound = StepBound { tau_max: 0.99 * pos, binding: Binding::Positivity };
    }
    if bound.tau_max < 1e-14 {
        return Err(MpecError::NoAdmissibleStep);
    }
    Ok(bound)
}

/// Everything an observer may want to recheck about one accepted step.
#[derive(Debug)]
pub struct StepEvent<'s, 'a> {
    pub iter: usize,
    pub arc: &'s ArcState<'a>,
    pub bound: StepBound,
    pub tau: f64,
    pub next: &'s Iterate,
    pub p: f64,
}

pub fn lcp_pipa_solve(inst: &MpecInstance, start: &Iterate, params: &LcpPipaParams) -> Result<SolveReport> {
    lcp_pipa_solve_observed(inst, start, params, |_| {})
}

/// As [`lcp_pipa_solve`], calling `observer` after every accepted step.
pub fn lcp_pipa_solve_observed<F>(inst: &MpecInstance, start: &Iterate, params: &LcpPipaParams, mut observer: F) -> Result<SolveReport>
where
    F: FnMut(&StepEvent),
{
    inst.lcp_data()?;
    params.validate()?;
    if start.dims() != inst.dims {
        return Err(MpecError::Dimension("start point dimensions do not match the instance".into()));
    }
    if !start.is_interior() {
        return Err(MpecError::Precondition("y and w must be strictly positive".into()));
    }
    if !inst.upper.contains(&start.x, 1e-10) {
        return Err(MpecError::Precondition("start point is outside X".into()));
    }
    let p = params.p.unwrap_or_else(|| default_centrality(start));
    if start.y.component_mul(&start.w).iter().any(|&v| v < p * start.mu()) {
        return Err(MpecError::Precondition("start point violates centrality".into()));
    }
    let params = PipaParams { p: Some(p), ..*params };
    let qv = params.q_matrix(inst);
    let mut u = start.clone();
    let mut alpha = params.alpha0;
    let mut report = SolveReport::new("pipa-lcp", start);
    let mut status = Termination::MaxIterations;

    for iter in 0..=params.max_iters {
        let phi = phi_lcp(inst, &u)?;
        let f = inst.objective_value(&u);
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
        let dir = lcp_pipa_direction(inst, &u, &qv, &params)?;
        row.norm_dx = dir.norm_dx();
        if phi <= params.tol_phi && -dir.model_value <= params.tol_stat {
            row.status = "feasible".into();
            report.trace.push(row);
            status = Termination::Converged;
            break;
        }
        let arc = ArcState::new(inst, &u, &dir.d, params.sigma)?;
        let f_slope = inst.objective_gradient(&u).dot(&dir.d);
        // one-sided derivative of y'w + ||r|| along the arc, using r(tau) = (1 - tau) r
        let phi_slope = arc.cross.sum() - arc.r0.norm();
        let new_alpha = update_penalty(alpha, f_slope, phi_slope, phi, &params);
        if new_alpha != alpha {
            report.penalty_updates.push(iter);
            alpha = new_alpha;
            row.alpha = Some(alpha);
            row.p_alpha = Some(f + alpha * phi);
        }
        let bound = match max_step(&arc, p) {
            Ok(b) => b,
            Err(MpecError::NoAdmissibleStep) => {
                row.status = "no_admissible_step".into();
                report.trace.push(row);
                status = Termination::Stalled;
                break;
            }
            Err(e) => return Err(e),
        };
        row.tau_max = Some(bound.tau_max);
        row.binding_condition = Some(bound.binding.as_str().into());
        let merit0 = f + alpha * phi;
        let decrease = -(f_slope + alpha * phi_slope);
        let mut tau = bound.tau_max;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let next = arc.point(tau);
            let merit = inst.objective_value(&next) + alpha * phi_lcp(inst, &next)?;
            if merit <= merit0 - params.armijo_eta * tau * decrease {
                accepted = Some(next);
                break;
            }
            tau *= params.armijo_rho;
        }
        let Some(next) = accepted else {
            row.status = "line_search_failed".into();
            report.trace.push(row);
            status = Termination::LineSearchFailed;
            break;
        };
        observer(&StepEvent { iter, arc: &arc, bound, tau, next: &next, p });
        row.tau = Some(tau);
        row.status = "step".into();
        report.trace.push(row);
        u = next;
        report.iterations += 1;
    }

    report.status = status;
    report.final_phi = phi_lcp(inst, &u)?;
    report.final_alpha = Some(alpha);
    report.penalty_branch = Some(if alpha >= params.alpha_max { PenaltyBranch::Unbounded } else { PenaltyBranch::Bounded });
    report.final_point = Point::from(&u);
    let stationary = classify_terminal(inst, &u, params.tol_class, &mut report)?;
    if report.status == Termination::Converged && !stationary {
        report.status = Termination::PossibleNonstationary;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::problem2;
    use crate::subsolvers::solve_qp;

    fn q1() -> Mat {
        Mat::identity(1, 1)
    }

    fn params() -> LcpPipaParams {
        LcpPipaParams { q_scale: Some(1.0), ..Default::default() }
    }

    #[test]
    fn problem_two_qp_data() {
        let inst = problem2();
        let u = inst.start.clone().unwrap();
        let qp = crate::pipa::direction_qp(&inst, &u, &q1(), &params());
        assert_eq!(qp.c.as_slice(), &[3.0, 5.0, 0.0]);
        assert_eq!(qp.q[(0, 0)], 1.0);
        assert_eq!(qp.eq_mat.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 1.0, -1.0]);
        assert_eq!(qp.eq_mat.row(1).iter().copied().collect::<Vec<_>>(), vec![0.0, 1.0, 2.0]);
        assert_eq!(qp.eq_rhs.as_slice(), &[0.0, -1.0]);
        assert_eq!(qp.ineq_mat.row(0).iter().copied().collect::<Vec<_>>(), vec![-1.0, 0.0, 0.0]);
        assert_eq!(qp.ineq_rhs.as_slice(), &[1.0]);
        assert_eq!(qp.ball.unwrap().radius_sq, 20.0);
        let sol = solve_qp(&qp).unwrap();
        assert!((sol.d[0] - 1.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn arc_identities_hold() {
        let inst = problem2();
        let u = inst.start.clone().unwrap();
        let dir = lcp_pipa_direction(&inst, &u, &q1(), &params()).unwrap();
        let arc = ArcState::new(&inst, &u, &dir.d, 0.5).unwrap();
        assert!(residual_on_arc(&arc, 1.0).unwrap().amax() < 1e-12);
        let c0 = complementarity_on_arc(&arc, 0.0).unwrap();
        assert_eq!(c0, arc.prod);
        for tau in [0.1, 0.3, 0.77] {
            let c = complementarity_on_arc(&arc, tau).unwrap().sum();
            let expect = (1.0 - tau + 0.5 * tau) * arc.wy + tau * tau * arc.dwdy;
            assert!((c - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn corrupted_direction_is_caught() {
        let inst = problem2();
        let u = inst.start.clone().unwrap();
        let mut d = lcp_pipa_direction(&inst, &u, &q1(), &params()).unwrap().d;
        d.w[0] += 1e-3;
        let arc = ArcState::new(&inst, &u, &d, 0.5).unwrap();
        assert!(matches!(residual_on_arc(&arc, 0.5), Err(MpecError::IdentityViolated { .. })));
    }

    #[test]
    fn complementarity_bound_closed_form() {
        let inst = problem2();
        let u = Iterate::from_slices(&[1.0], &[1.0], &[1.0], &[]);
        // dw'dy = -sigma w'y: the bound from limited decrease is exactly 1
        let d = Iterate::from_slices(&[0.0], &[0.5], &[-1.0], &[]);
        let arc = ArcState::new(&inst, &u, &d, 0.5).unwrap();
        assert_eq!(arc.sigma * arc.wy / -arc.dwdy, 1.0);
        let d = Iterate::from_slices(&[0.0], &[0.5], &[0.5], &[]);
        let arc = ArcState::new(&inst, &u, &d, 0.5).unwrap();
        assert_eq!(max_step(&arc, 0.1).unwrap().binding, Binding::None);
    }

    #[test]
    fn solves_problem_two() {
        let inst = problem2();
        let mut steps = 0;
        let r = lcp_pipa_solve_observed(&inst, &inst.start.clone().unwrap(), &LcpPipaParams::default(), |ev| {
            steps += 1;
            let after = ev.next.w.dot(&ev.next.y);
            assert!(after >= (1.0 - ev.tau) * ev.arc.wy - 1e-12);
        })
        .unwrap();
        assert_eq!(steps, r.iterations);
        assert!(r.final_phi <= 1e-10, "{:?}", r.status);
        assert!(r.final_value >= 2.0 - 1e-8);
    }

    #[test]
    fn feasible_start_keeps_zero_residual() {
        let inst = problem2();
        let start = Iterate::from_slices(&[1.0], &[1.5], &[0.5], &[]);
        lcp_pipa_solve_observed(&inst, &start, &LcpPipaParams::default(), |ev| {
            let r = lcp_residual(&inst, &ev.next.x, &ev.next.y, &ev.next.w).unwrap();
            assert!(r.amax() < 1e-12);
        })
        .unwrap();
    }
}
