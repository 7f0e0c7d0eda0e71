use serde::{Deserialize, Serialize};

use crate::error::{MpecError, Result};
use crate::linalg::{concat, is_symmetric, max_abs, min_symmetric_eigenvalue, Mat, Vector};
use crate::subsolvers::{solve_qp, QpProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub n: usize,
    pub m: usize,
    pub l: usize,
}

/// Quadratic objective
/// `1/2 x'Hxx x + x'Hxy y + 1/2 y'Hyy y + x'Hxw w + 1/2 w'Hww w + c'u + c0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub hxx: Mat,
    pub hxy: Mat,
    pub hyy: Mat,
    pub hxw: Mat,
    pub hww: Mat,
    pub cx: Vector,
    pub cy: Vector,
    pub cw: Vector,
    pub cz: Vector,
    pub c0: f64,
}

impl Objective {
    pub fn zero(d: Dims) -> Self {
        Objective {
            hxx: Mat::zeros(d.n, d.n),
            hxy: Mat::zeros(d.n, d.m),
            hyy: Mat::zeros(d.m, d.m),
            hxw: Mat::zeros(d.n, d.m),
            hww: Mat::zeros(d.m, d.m),
            cx: Vector::zeros(d.n),
            cy: Vector::zeros(d.m),
            cw: Vector::zeros(d.m),
            cz: Vector::zeros(d.l),
            c0: 0.0,
        }
    }
}

/// Lower-level equilibrium data: either `w = q + N x + M y` or the general
/// affine map `F = Ax x + Ay y + Aw w + Az z + b` with `m + l` rows.
#[derive(Debug, Clone, PartialEq)]
pub enum LowerLevel {
    Lcp { q: Vector, n_mat: Mat, m_mat: Mat },
    Affine { ax: Mat, ay: Mat, aw: Mat, az: Mat, b: Vector },
}

/// `X = {x : G x <= a}`.
#[derive(Debug, Clone, PartialEq)]
pub struct UpperSet {
    pub g: Mat,
    pub a: Vector,
}

impl UpperSet {
    pub fn contains(&self, x: &Vector, tol: f64) -> bool {
        self.g.nrows() == 0 || (&self.g * x - &self.a).iter().all(|&s| s <= tol)
    }

    pub fn slack(&self, x: &Vector) -> Vector {
        &self.a - &self.g * x
    }
}

/// Point `(x, y, w, z)`; `mu` is always recomputed from `y` and `w`.
#[derive(Debug, Clone, PartialEq)]
pub struct Iterate {
    pub x: Vector,
    pub y: Vector,
    pub w: Vector,
    pub z: Vector,
}

impl Iterate {
    pub fn new(x: Vector, y: Vector, w: Vector, z: Vector) -> Self {
        Iterate { x, y, w, z }
    }

    pub fn from_slices(x: &[f64], y: &[f64], w: &[f64], z: &[f64]) -> Self {
        Iterate {
            x: Vector::from_column_slice(x),
            y: Vector::from_column_slice(y),
            w: Vector::from_column_slice(w),
            z: Vector::from_column_slice(z),
        }
    }

    pub fn dims(&self) -> Dims {
        Dims { n: self.x.len(), m: self.y.len(), l: self.z.len() }
    }

    /// Average complementarity product `y'w / m` (0 when `m = 0`).
    pub fn mu(&self) -> f64 {
        if self.y.is_empty() {
            0.0
        } else {
            self.y.dot(&self.w) / self.y.len() as f64
        }
    }

    pub fn is_interior(&self) -> bool {
        self.y.iter().chain(self.w.iter()).all(|&v| v > 0.0)
    }

    /// `u + tau * d`, where `d` is laid out like an iterate.
    pub fn step(&self, d: &Iterate, tau: f64) -> Iterate {
        Iterate {
            x: &self.x + &d.x * tau,
            y: &self.y + &d.y * tau,
            w: &self.w + &d.w * tau,
            z: &self.z + &d.z * tau,
        }
    }

    pub fn stacked(&self) -> Vector {
        concat(&[&self.x, &self.y, &self.w, &self.z])
    }

    pub fn from_stacked(v: &Vector, d: Dims) -> Self {
        Iterate {
            x: v.rows(0, d.n).into_owned(),
            y: v.rows(d.n, d.m).into_owned(),
            w: v.rows(d.n + d.m, d.m).into_owned(),
            z: v.rows(d.n + 2 * d.m, d.l).into_owned(),
        }
    }
}

/// Gradient laid out by variable block.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub x: Vector,
    pub y: Vector,
    pub w: Vector,
    pub z: Vector,
}

impl Gradient {
    pub fn dot(&self, d: &Iterate) -> f64 {
        self.x.dot(&d.x) + self.y.dot(&d.y) + self.w.dot(&d.w) + self.z.dot(&d.z)
    }
}

/// Jacobian blocks of the lower-level map `F`.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerJacobian {
    pub x: Mat,
    pub y: Mat,
    pub w: Mat,
    pub z: Mat,
}

impl LowerJacobian {
    pub fn apply(&self, d: &Iterate) -> Vector {
        &self.x * &d.x + &self.y * &d.y + &self.w * &d.w + &self.z * &d.z
    }
}

/// In-process evaluator interface. Instances loaded from files are
/// quadratic-affine; other smooth problems can implement this trait directly
/// and be handed to the PIPA solver.
pub trait MpecEvaluator {
    fn dims(&self) -> Dims;
    fn objective_value(&self, u: &Iterate) -> f64;
    fn objective_gradient(&self, u: &Iterate) -> Gradient;
    /// `F(u)`, length `m + l`.
    fn lower_residual(&self, u: &Iterate) -> Vector;
    fn lower_jacobian(&self, u: &Iterate) -> LowerJacobian;
    fn upper_set(&self) -> &UpperSet;
    /// Norm of the x-block Hessian of the objective when it is known.
    fn curvature_scale(&self) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpecInstance {
    pub dims: Dims,
    pub objective: Objective,
    pub lower: LowerLevel,
    pub upper: UpperSet,
    /// Optional starting point carried by the instance file.
    pub start: Option<Iterate>,
}

impl MpecInstance {
    pub fn n(&self) -> usize {
        self.dims.n
    }
    pub fn m(&self) -> usize {
        self.dims.m
    }
    pub fn l(&self) -> usize {
        self.dims.l
    }

    pub fn is_lcp(&self) -> bool {
        matches!(self.lower, LowerLevel::Lcp { .. })
    }

    /// `(q, N, M)` for instances with an LCP lower level.
    pub fn lcp_data(&self) -> Result<(&Vector, &Mat, &Mat)> {
        match &self.lower {
            LowerLevel::Lcp { q, n_mat, m_mat } => Ok((q, n_mat, m_mat)),
            LowerLevel::Affine { .. } => Err(MpecError::WrongForm),
        }
    }

    /// Affine blocks `(Ax, Ay, Aw, Az, b)`; the LCP form maps to
    /// `F = q + N x + M y - w`.
    pub fn affine_blocks(&self) -> (Mat, Mat, Mat, Mat, Vector) {
        match &self.lower {
            LowerLevel::Lcp { q, n_mat, m_mat } => {
                let m = self.m();
                (n_mat.clone(), m_mat.clone(), -Mat::identity(m, m), Mat::zeros(m, 0), q.clone())
            }
            LowerLevel::Affine { ax, ay, aw, az, b } => (ax.clone(), ay.clone(), aw.clone(), az.clone(), b.clone()),
        }
    }

    /// Full symmetric Hessian of the objective over `u = (x, y, w, z)`.
    pub fn full_hessian(&self) -> Mat {
        let Dims { n, m, l } = self.dims;
        let o = &self.objective;
        let mut h = Mat::zeros(n + 2 * m + l, n + 2 * m + l);
        h.view_mut((0, 0), (n, n)).copy_from(&o.hxx);
        h.view_mut((0, n), (n, m)).copy_from(&o.hxy);
        h.view_mut((n, 0), (m, n)).copy_from(&o.hxy.transpose());
        h.view_mut((n, n), (m, m)).copy_from(&o.hyy);
        h.view_mut((0, n + m), (n, m)).copy_from(&o.hxw);
        h.view_mut((n + m, 0), (m, n)).copy_from(&o.hxw.transpose());
        h.view_mut((n + m, n + m), (m, m)).copy_from(&o.hww);
        h
    }

    pub fn full_linear(&self) -> Vector {
        let o = &self.objective;
        concat(&[&o.cx, &o.cy, &o.cw, &o.cz])
    }

    /// Semantic checks that do not prevent the matrices from being built:
    /// symmetric Hessian blocks, monotone LCP matrix, nonempty `X`.
    pub fn validate(&self) -> Vec<String> {
        let mut issues = Vec::new();
        let o = &self.objective;
        for (name, h) in [("Hxx", &o.hxx), ("Hyy", &o.hyy), ("Hww", &o.hww)] {
            if !is_symmetric(h, 1e-12 * (1.0 + max_abs(h))) {
                issues.push(format!("{name} is not symmetric"));
            }
        }
        if let LowerLevel::Lcp { m_mat, .. } = &self.lower {
            let ev = min_symmetric_eigenvalue(m_mat);
            if ev < -1e-10 {
                issues.push(format!("M is not positive semidefinite (smallest eigenvalue {ev:.3e})"));
            }
        }
        if self.upper.g.nrows() > 0 {
            let n = self.n();
            let p = QpProblem::new(Mat::zeros(n, n), Vector::zeros(n))
                .with_inequalities(self.upper.g.clone(), self.upper.a.clone());
            if solve_qp(&p).is_err() {
                issues.push("upper-level set X is empty".into());
            }
        }
        if let Some(s) = &self.start {
            if s.dims() != self.dims {
                issues.push("start point dimensions do not match the instance".into());
            }
        }
        issues
    }

    /// Euclidean projection of the origin onto `X`.
    pub fn projected_origin(&self) -> Result<Vector> {
        let n = self.n();
        if self.upper.g.nrows() == 0 || self.upper.contains(&Vector::zeros(n), 0.0) {
            return Ok(Vector::zeros(n));
        }
        let p = QpProblem::new(Mat::identity(n, n), Vector::zeros(n))
            .with_inequalities(self.upper.g.clone(), self.upper.a.clone());
        Ok(solve_qp(&p)?.d)
    }

    /// The stored start, else the projected origin with `y = w = e`, `z = 0`.
    pub fn interior_start(&self) -> Result<Iterate> {
        if let Some(s) = &self.start {
            return Ok(s.clone());
        }
        let Dims { m, l, .. } = self.dims;
        Ok(Iterate::new(self.projected_origin()?, Vector::from_element(m, 1.0), Vector::from_element(m, 1.0), Vector::zeros(l)))
    }

    /// Fails with the first validation issue, if any.
    pub fn validated(self) -> Result<Self> {
        match self.validate().into_iter().next() {
            Some(issue) => Err(MpecError::InvalidInstance(issue)),
            None => Ok(self),
        }
    }

    /// Objective `f(x, y, w)` with `w` eliminated through `w = q + N x + M y`,
    /// returned as `(H, c, c0)` over `(x, y)`.
    pub fn reduced_objective_xy(&self) -> Result<(Mat, Vector, f64)> {
        let (q, nm, mm) = self.lcp_data()?;
        let Dims { n, m, .. } = self.dims;
        // u = P (x, y) + u0
        let mut p = Mat::zeros(n + 2 * m, n + m);
        p.view_mut((0, 0), (n + m, n + m)).fill_with_identity();
        p.view_mut((n + m, 0), (m, n)).copy_from(nm);
        p.view_mut((n + m, n), (m, m)).copy_from(mm);
        let mut u0 = Vector::zeros(n + 2 * m);
        u0.rows_mut(n + m, m).copy_from(q);
        let h = self.full_hessian();
        let c = self.full_linear();
        let hr = p.transpose() * &h * &p;
        let hr = (&hr + hr.transpose()) * 0.5;
        let cr = p.transpose() * (&h * &u0 + &c);
        let c0 = 0.5 * u0.dot(&(&h * &u0)) + c.dot(&u0) + self.objective.c0;
        Ok((hr, cr, c0))
    }
}

impl MpecEvaluator for MpecInstance {
    fn dims(&self) -> Dims {
        self.dims
    }

    fn objective_value(&self, u: &Iterate) -> f64 {
        let o = &self.objective;
        0.5 * u.x.dot(&(&o.hxx * &u.x))
            + u.x.dot(&(&o.hxy * &u.y))
            + 0.5 * u.y.dot(&(&o.hyy * &u.y))
            + u.x.dot(&(&o.hxw * &u.w))
            + 0.5 * u.w.dot(&(&o.hww * &u.w))
            + o.cx.dot(&u.x)
            + o.cy.dot(&u.y)
            + o.cw.dot(&u.w)
            + o.cz.dot(&u.z)
            + o.c0
    }

    fn objective_gradient(&self, u: &Iterate) -> Gradient {
        let o = &self.objective;
        Gradient {
            x: &o.hxx * &u.x + &o.hxy * &u.y + &o.hxw * &u.w + &o.cx,
            y: o.hxy.transpose() * &u.x + &o.hyy * &u.y + &o.cy,
            w: o.hxw.transpose() * &u.x + &o.hww * &u.w + &o.cw,
            z: o.cz.clone(),
        }
    }

    fn lower_residual(&self, u: &Iterate) -> Vector {
        match &self.lower {
            LowerLevel::Lcp { q, n_mat, m_mat } => q + n_mat * &u.x + m_mat * &u.y - &u.w,
            LowerLevel::Affine { ax, ay, aw, az, b } => ax * &u.x + ay * &u.y + aw * &u.w + az * &u.z + b,
        }
    }

    fn lower_jacobian(&self, _u: &Iterate) -> LowerJacobian {
        let (x, y, w, z, _) = self.affine_blocks();
        LowerJacobian { x, y, w, z }
    }

    fn upper_set(&self) -> &UpperSet {
        &self.upper
    }

    fn curvature_scale(&self) -> Option<f64> {
        Some(self.objective.hxx.norm())
    }
}
