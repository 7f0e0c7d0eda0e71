//! Piecewise SQP on the KKT form of the lower level: the complementarity
//! `0 <= lambda _|_ -g(x, y) >= 0` is split into a smooth piece by assigning
//! every index to `J1` (`lambda_i = 0`, `g_i <= 0`) or `J2` (`g_i = 0`,
//! `lambda_i >= 0`), and an SQP step is taken on that piece.

use serde::{Deserialize, Serialize};

use crate::error::{MpecError, Result};
use crate::linalg::{lstsq, min_symmetric_eigenvalue, norm_inf, null_space, Mat, Vector};
use crate::model::{Iterate, MpecInstance};
use crate::par::mask_members;
use crate::report::{Point, SolveReport, Termination, TraceRow};
use crate::subsolvers::{solve_qp, QpProblem};

/// Largest degenerate set checked at termination.
pub const DEGENERATE_LIMIT: usize = 16;

/// `min 1/2 v'Hv + c'v + c0` over `v = (x, y, lambda)` subject to
/// `L = F(x, y) + gy' lambda = 0`, `0 <= lambda _|_ -g >= 0` and the upper
/// rows `ux x + uy y + u0 <= 0`. All data are affine.
#[derive(Debug, Clone)]
pub struct KktMpecInstance {
    pub n: usize,
    pub m: usize,
    pub l: usize,
    pub hess: Mat,
    pub lin: Vector,
    pub c0: f64,
    pub fx: Mat,
    pub fy: Mat,
    pub f0: Vector,
    pub gx: Mat,
    pub gy: Mat,
    pub g0: Vector,
    pub ux: Mat,
    pub uy: Mat,
    pub u0: Vector,
}

impl KktMpecInstance {
    /// LCP lower level as `g = -y`, so that `L = q + Nx + My - lambda` and
    /// `lambda` plays the role of `w`.
    pub fn from_lcp(inst: &MpecInstance) -> Result<Self> {
        let (q, nm, mm) = inst.lcp_data()?;
        let (n, m) = (inst.n(), inst.m());
        let k = inst.upper.g.nrows();
        let kkt = KktMpecInstance {
            n,
            m,
            l: m,
            hess: inst.full_hessian(),
            lin: inst.full_linear(),
            c0: inst.objective.c0,
            fx: nm.clone(),
            fy: mm.clone(),
            f0: q.clone(),
            gx: Mat::zeros(m, n),
            gy: -Mat::identity(m, m),
            g0: Vector::zeros(m),
            ux: inst.upper.g.clone(),
            uy: Mat::zeros(k, m),
            u0: -inst.upper.a.clone(),
        };
        kkt.check()?;
        Ok(kkt)
    }

    pub fn dim(&self) -> usize {
        self.n + self.m + self.l
    }

    pub fn check(&self) -> Result<()> {
        let (n, m, l, k) = (self.n, self.m, self.l, self.u0.len());
        let d = self.dim();
        let ok = self.hess.shape() == (d, d)
            && self.lin.len() == d
            && self.fx.shape() == (m, n)
            && self.fy.shape() == (m, m)
            && self.f0.len() == m
            && self.gx.shape() == (l, n)
            && self.gy.shape() == (l, m)
            && self.g0.len() == l
            && self.ux.shape() == (k, n)
            && self.uy.shape() == (k, m);
        if ok {
            Ok(())
        } else {
            Err(MpecError::Dimension("KKT-form blocks are inconsistent".into()))
        }
    }

    fn parts<'a>(&self, v: &'a Vector) -> (nalgebra::DVectorView<'a, f64>, nalgebra::DVectorView<'a, f64>, nalgebra::DVectorView<'a, f64>) {
        (v.rows(0, self.n), v.rows(self.n, self.m), v.rows(self.n + self.m, self.l))
    }

    pub fn objective(&self, v: &Vector) -> f64 {
        0.5 * v.dot(&(&self.hess * v)) + self.lin.dot(v) + self.c0
    }

    pub fn gradient(&self, v: &Vector) -> Vector {
        &self.hess * v + &self.lin
    }

    pub fn g_value(&self, v: &Vector) -> Vector {
        let (x, y, _) = self.parts(v);
        &self.gx * x + &self.gy * y + &self.g0
    }

    pub fn l_value(&self, v: &Vector) -> Vector {
        let (x, y, lam) = self.parts(v);
        &self.fx * x + &self.fy * y + &self.f0 + self.gy.transpose() * lam
    }

    pub fn upper_value(&self, v: &Vector) -> Vector {
        let (x, y, _) = self.parts(v);
        &self.ux * x + &self.uy * y + &self.u0
    }

    /// `||L|| + |g'lambda|`; equals the LCP infeasibility for [`from_lcp`](Self::from_lcp).
    pub fn infeasibility(&self, v: &Vector) -> f64 {
        let (_, _, lam) = self.parts(v);
        self.l_value(v).norm() + self.g_value(v).dot(&lam).abs()
    }

    /// Row `i` of `[gx gy 0]`.
    fn g_row(&self, i: usize) -> Vector {
        let mut r = Vector::zeros(self.dim());
        for j in 0..self.n {
            r[j] = self.gx[(i, j)];
        }
        for j in 0..self.m {
            r[self.n + j] = self.gy[(i, j)];
        }
        r
    }

    /// Stacks `(x, y, lambda)` for [`from_lcp`](Self::from_lcp) instances.
    pub fn stack_lcp(u: &Iterate) -> Vector {
        let mut v = Vector::zeros(u.x.len() + 2 * u.y.len());
        v.rows_mut(0, u.x.len()).copy_from(&u.x);
        v.rows_mut(u.x.len(), u.y.len()).copy_from(&u.y);
        v.rows_mut(u.x.len() + u.y.len(), u.w.len()).copy_from(&u.w);
        v
    }

    pub fn to_point(&self, v: &Vector) -> Point {
        let (x, y, lam) = self.parts(v);
        Point { x: x.iter().copied().collect(), y: y.iter().copied().collect(), w: lam.iter().copied().collect(), z: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ActiveSets {
    /// `g_i = 0 = lambda_i`
    pub zero: Vec<usize>,
    /// `g_i = 0 < lambda_i`
    pub plus: Vec<usize>,
    /// `g_i < 0 = lambda_i`
    pub inactive: Vec<usize>,
}

pub fn active_sets(inst: &KktMpecInstance, v: &Vector, tol: f64) -> Result<ActiveSets> {
    let g = inst.g_value(v);
    let lam = v.rows(inst.n + inst.m, inst.l);
    let mut s = ActiveSets::default();
    for i in 0..inst.l {
        if lam[i] < -tol || g[i] > tol {
            return Err(MpecError::NegativeVariables);
        }
        let on_g = g[i].abs() <= tol;
        let on_lam = lam[i].abs() <= tol;
        match (on_g, on_lam) {
            (true, true) => s.zero.push(i),
            (true, false) => s.plus.push(i),
            (false, true) => s.inactive.push(i),
            (false, false) => return Err(MpecError::NotComplementary(i)),
        }
    }
    Ok(s)
}

/// `J1`: `lambda_i = 0`, `g_i <= 0`. `J2`: `g_i = 0`, `lambda_i >= 0`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Piece {
    pub j1: Vec<usize>,
    pub j2: Vec<usize>,
}

impl Piece {
    pub fn new(mut j1: Vec<usize>, mut j2: Vec<usize>, l: usize) -> Result<Self> {
        j1.sort_unstable();
        j2.sort_unstable();
        let mut all: Vec<usize> = j1.iter().chain(&j2).copied().collect();
        all.sort_unstable();
        if all != (0..l).collect::<Vec<_>>() {
            return Err(MpecError::Precondition("J1 and J2 must partition the complementarity indices".into()));
        }
        Ok(Piece { j1, j2 })
    }
}

/// Degenerate indices go to `J2` when `lambda_i >= -g_i`.
pub fn select_piece(inst: &KktMpecInstance, v: &Vector, tol: f64) -> Result<Piece> {
    let sets = active_sets(inst, v, tol)?;
    let g = inst.g_value(v);
    let lam = v.rows(inst.n + inst.m, inst.l);
    let mut j1 = sets.inactive;
    let mut j2 = sets.plus;
    for &i in &sets.zero {
        if lam[i] >= -g[i] {
            j2.push(i);
        } else {
            j1.push(i);
        }
    }
    Piece::new(j1, j2, inst.l)
}

/// The piece obtained by moving the indices in `flip` to the other side.
fn flipped(piece: &Piece, flip: &[usize], l: usize) -> Piece {
    let (mut j1, mut j2) = (Vec::new(), Vec::new());
    for &i in &piece.j1 {
        if flip.contains(&i) { j2.push(i) } else { j1.push(i) }
    }
    for &i in &piece.j2 {
        if flip.contains(&i) { j1.push(i) } else { j2.push(i) }
    }
    Piece::new(j1, j2, l).expect("flipping preserves the partition")
}

#[derive(Debug, Clone)]
pub struct PsqpStep {
    pub dw: Vector,
    /// Multipliers of the equality rows: `L` rows, then `J1` rows, then `J2` rows.
    pub nu: Vector,
    /// Multipliers of the inequality rows: upper rows, then `J1`, then `J2`.
    pub mu: Vector,
    /// Model value `grad'dw + 1/2 dw'H dw`.
    pub value: f64,
}

/// Builds the piece QP in `dw`.
fn piece_qp(inst: &KktMpecInstance, v: &Vector, piece: &Piece) -> QpProblem {
    let (n, m, l) = (inst.n, inst.m, inst.l);
    let d = inst.dim();
    let k = inst.u0.len();
    let lam0 = n + m;
    let lv = inst.l_value(v);
    let gv = inst.g_value(v);
    let uv = inst.upper_value(v);

    let neq = m + l;
    let mut eq = Mat::zeros(neq, d);
    let mut eq_rhs = Vector::zeros(neq);
    eq.view_mut((0, 0), (m, n)).copy_from(&inst.fx);
    eq.view_mut((0, n), (m, m)).copy_from(&inst.fy);
    eq.view_mut((0, lam0), (m, l)).copy_from(&inst.gy.transpose());
    eq_rhs.rows_mut(0, m).copy_from(&(-&lv));
    let mut ineq = Mat::zeros(k + l, d);
    let mut ineq_rhs = Vector::zeros(k + l);
    ineq.view_mut((0, 0), (k, n)).copy_from(&inst.ux);
    ineq.view_mut((0, n), (k, m)).copy_from(&inst.uy);
    ineq_rhs.rows_mut(0, k).copy_from(&(-&uv));

    let mut row = 0;
    for &i in &piece.j1 {
        eq[(m + row, lam0 + i)] = 1.0;
        eq_rhs[m + row] = -v[lam0 + i];
        ineq.set_row(k + row, &inst.g_row(i).transpose());
        ineq_rhs[k + row] = -gv[i];
        row += 1;
    }
    for &i in &piece.j2 {
        eq.set_row(m + row, &inst.g_row(i).transpose());
        eq_rhs[m + row] = -gv[i];
        ineq[(k + row, lam0 + i)] = -1.0;
        ineq_rhs[k + row] = v[lam0 + i];
        row += 1;
    }
    QpProblem::new(inst.hess.clone(), inst.gradient(v))
        .with_equalities(eq, eq_rhs)
        .with_inequalities(ineq, ineq_rhs)
}

/// One SQP step on `piece`. The Lagrangian Hessian of affine constraints is
/// the objective Hessian, so no multiplier estimate enters the model; the
/// returned `nu` is the QP's own equality multiplier vector.
pub fn psqp_step(inst: &KktMpecInstance, v: &Vector, piece: &Piece) -> Result<PsqpStep> {
    let p = piece_qp(inst, v, piece);
    let d = inst.dim();
    let d0 = lstsq(&p.eq_mat, &p.eq_rhs);
    if norm_inf(&(&p.eq_mat * &d0 - &p.eq_rhs)) > 1e-9 * (1.0 + norm_inf(&p.eq_rhs)) {
        return Err(MpecError::InconsistentPiece);
    }
    let z = null_space(&p.eq_mat, 1e-12);
    let scale = 1.0 + inst.hess.amax();
    let (mut dw, mu) = if z.ncols() == 0 {
        if p.max_violation(&d0) > 1e-9 * (1.0 + d0.amax()) {
            return Err(MpecError::InconsistentPiece);
        }
        (d0, Vector::zeros(p.ineq_rhs.len()))
    } else {
        let hz = z.transpose() * &p.q * &z;
        let hz = (&hz + hz.transpose()) * 0.5;
        if min_symmetric_eigenvalue(&hz) < -1e-10 * scale {
            return Err(MpecError::Precondition("objective is not convex on the selected piece".into()));
        }
        let cz = z.transpose() * (&p.q * &d0 + &p.c);
        let reduced = QpProblem::new(hz, cz).with_inequalities(&p.ineq_mat * &z, &p.ineq_rhs - &p.ineq_mat * &d0);
        let sol = match solve_qp(&reduced) {
            Ok(s) => s,
            Err(MpecError::Infeasible) => return Err(MpecError::InconsistentPiece),
            Err(e) => return Err(e),
        };
        (&d0 + &z * sol.d, sol.ineq_multipliers)
    };
    // lambda_J1 lands exactly on zero
    let lam0 = inst.n + inst.m;
    for &i in &piece.j1 {
        dw[lam0 + i] = -v[lam0 + i];
    }
    let resid = &p.q * &dw + &p.c + p.ineq_mat.transpose() * &mu;
    let nu = if p.eq_mat.nrows() == 0 { Vector::zeros(0) } else { lstsq(&p.eq_mat.transpose(), &(-resid)) };
    debug_assert_eq!(dw.len(), d);
    let value = p.c.dot(&dw) + 0.5 * dw.dot(&(&p.q * &dw));
    Ok(PsqpStep { dw, nu, mu, value })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PsqpParams {
    /// Stop when `||dw|| <= tol`.
    pub tol: f64,
    /// Zero threshold for the active sets.
    pub active_tol: f64,
    pub max_iters: usize,
    /// Reference solution `(x, y, lambda)` for the error ratios.
    pub reference: Option<Vec<f64>>,
}

impl Default for PsqpParams {
    fn default() -> Self {
        PsqpParams { tol: 1e-10, active_tol: 1e-8, max_iters: 50, reference: None }
    }
}

/// Pieces reachable from `piece` by flipping degenerate indices, excluding
/// `piece` itself.
fn alternatives(piece: &Piece, zero: &[usize], l: usize) -> Vec<Piece> {
    (1..(1usize << zero.len()))
        .map(|mask| {
            let flip: Vec<usize> = mask_members(mask, zero.len()).into_iter().map(|k| zero[k]).collect();
            flipped(piece, &flip, l)
        })
        .collect()
}

/// Full-step PSQP from `start = (x, y, lambda)`. A point where the selected
/// piece gives `dw = 0` is `Converged` when no alternative piece through the
/// point has a descent step, `PieceStationary` otherwise.
pub fn psqp_solve(inst: &KktMpecInstance, start: &Vector, params: &PsqpParams) -> Result<SolveReport> {
    inst.check()?;
    if start.len() != inst.dim() {
        return Err(MpecError::Dimension("start point has the wrong length".into()));
    }
    let reference = match &params.reference {
        Some(r) if r.len() != inst.dim() => return Err(MpecError::Dimension("reference has the wrong length".into())),
        Some(r) => Some(Vector::from_column_slice(r)),
        None => None,
    };
    let limit = 1e6 * (1.0 + start.norm());
    let mut v = start.clone();
    let mut report = SolveReport::new("psqp", &Iterate::new(Vector::zeros(0), Vector::zeros(0), Vector::zeros(0), Vector::zeros(0)));
    report.status = Termination::MaxIterations;
    report.classification_tol = params.tol;
    let mut last_norm = f64::NAN;
    let mut degenerate = false;
    for iter in 0..=params.max_iters {
        let piece = select_piece(inst, &v, params.active_tol)?;
        let step = psqp_step(inst, &v, &piece)?;
        let norm = step.dw.norm();
        let lam = v.rows(inst.n + inst.m, inst.l);
        let mut row = TraceRow {
            iter,
            phi: inst.infeasibility(&v),
            p_alpha: None,
            mu: if inst.l == 0 { 0.0 } else { inst.g_value(&v).dot(&lam).abs() / inst.l as f64 },
            norm_dx: step.dw.rows(0, inst.n).norm(),
            piece_j2: Some(piece.j2.clone()),
            step_norm: Some(norm),
            ..Default::default()
        };
        if norm <= params.tol {
            let sets = active_sets(inst, &v, params.active_tol)?;
            degenerate = !sets.zero.is_empty();
            if sets.zero.len() > DEGENERATE_LIMIT {
                return Err(MpecError::DimensionTooLarge(sets.zero.len(), DEGENERATE_LIMIT));
            }
            let mut worst = norm;
            let mut descent = false;
            for alt in alternatives(&piece, &sets.zero, inst.l) {
                match psqp_step(inst, &v, &alt) {
                    Ok(s) => {
                        worst = worst.max(s.dw.norm());
                        if s.value < -params.tol * (1.0 + inst.objective(&v).abs()) {
                            descent = true;
                        }
                    }
                    Err(MpecError::InconsistentPiece) => {}
                    Err(e) => return Err(e),
                }
            }
            last_norm = worst;
            report.status = if descent { Termination::PieceStationary } else { Termination::Converged };
            row.status = if descent { "piece_stationary" } else { "stationary" }.into();
            report.trace.push(row);
            break;
        }
        last_norm = norm;
        if iter == params.max_iters {
            row.status = "max_iters".into();
            report.trace.push(row);
            break;
        }
        let next = &v + &step.dw;
        if let Some(r) = &reference {
            let before = (&v - r).norm();
            if before > 0.0 {
                row.ratio = Some((&next - r).norm() / before);
            }
        }
        row.tau = Some(1.0);
        v = next;
        // the J1 multipliers are exact zeros by construction
        let lam0 = inst.n + inst.m;
        for &i in &piece.j1 {
            v[lam0 + i] = 0.0;
        }
        report.iterations += 1;
        if !(v.norm() <= limit) {
            row.status = "diverged".into();
            report.trace.push(row);
            report.status = Termination::Diverged;
            break;
        }
        row.status = "step".into();
        report.trace.push(row);
    }
    report.final_point = inst.to_point(&v);
    report.final_value = inst.objective(&v);
    report.final_phi = inst.infeasibility(&v);
    report.stationarity_residual = Some(last_norm);
    report.degenerate_terminal = degenerate;
    Ok(report)
}

/// Ratios recorded in a PSQP trace, in iteration order.
pub fn ratios(report: &SolveReport) -> Vec<f64> {
    report.trace.iter().filter_map(|r| r.ratio).collect()
}
