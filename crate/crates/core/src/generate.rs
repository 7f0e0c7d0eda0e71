//! Seeded random instances and points for property tests and benchmarks.

use rand::Rng;

use crate::linalg::{Mat, Vector};
use crate::model::{Dims, Iterate, LowerLevel, MpecInstance, Objective, UpperSet};
use crate::subsolvers::QpProblem;

/// Half-width of the box `X` used by the generators.
pub const BOX: f64 = 2.0;

fn uniform<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

fn uniform_vec<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vector {
    Vector::from_fn(len, |_, _| rng.random_range(-1.0..1.0))
}

/// `0.5 B'B + (S - S')/2 + 0.1 I`: monotone, usually not symmetric.
pub fn monotone_matrix<R: Rng + ?Sized>(rng: &mut R, m: usize) -> Mat {
    let b = uniform(rng, m, m);
    let s = uniform(rng, m, m);
    b.transpose() * &b * 0.5 + (&s - s.transpose()) * 0.5 + Mat::identity(m, m) * 0.1
}

pub fn monotone_lcp<R: Rng + ?Sized>(rng: &mut R, m: usize) -> (Mat, Vector) {
    let mm = monotone_matrix(rng, m);
    (mm, uniform_vec(rng, m))
}

fn box_set(n: usize) -> UpperSet {
    let mut g = Mat::zeros(2 * n, n);
    g.view_mut((0, 0), (n, n)).fill_with_identity();
    g.view_mut((n, 0), (n, n)).copy_from(&(-Mat::identity(n, n)));
    UpperSet { g, a: Vector::from_element(2 * n, BOX) }
}

/// Strictly convex quadratic in `(x, y)`; the `w` and `z` blocks are zero.
fn convex_objective<R: Rng + ?Sized>(rng: &mut R, d: Dims) -> Objective {
    let k = d.n + d.m;
    let r = uniform(rng, k, k);
    let h = r.transpose() * &r * 0.5 + Mat::identity(k, k) * 0.05;
    let mut o = Objective::zero(d);
    o.hxx = h.view((0, 0), (d.n, d.n)).into_owned();
    o.hxy = h.view((0, d.n), (d.n, d.m)).into_owned();
    o.hyy = h.view((d.n, d.n), (d.m, d.m)).into_owned();
    o.cx = uniform_vec(rng, d.n);
    o.cy = uniform_vec(rng, d.m);
    o
}

/// LCP lower level with a monotone `M`, a convex `(x, y)` objective and the
/// box `[-2, 2]^n`.
pub fn random_lcp_instance<R: Rng + ?Sized>(rng: &mut R, n: usize, m: usize) -> MpecInstance {
    let d = Dims { n, m, l: 0 };
    let objective = convex_objective(rng, d);
    let (m_mat, q) = monotone_lcp(rng, m);
    let n_mat = uniform(rng, m, n);
    MpecInstance { dims: d, objective, lower: LowerLevel::Lcp { q, n_mat, m_mat }, upper: box_set(n), start: None }
}

/// General affine lower level with `l` free variables.
pub fn random_affine_instance<R: Rng + ?Sized>(rng: &mut R, n: usize, m: usize, l: usize) -> MpecInstance {
    let d = Dims { n, m, l };
    let objective = convex_objective(rng, d);
    let lower = LowerLevel::Affine {
        ax: uniform(rng, m + l, n),
        ay: uniform(rng, m + l, m),
        aw: uniform(rng, m + l, m),
        az: uniform(rng, m + l, l),
        b: uniform_vec(rng, m + l),
    };
    MpecInstance { dims: d, objective, lower, upper: box_set(n), start: None }
}

/// `x` inside the box, `y, w` in `[0.1, 2]`, `z` in `[-1, 1]`.
pub fn random_interior_iterate<R: Rng + ?Sized>(rng: &mut R, d: Dims) -> Iterate {
    let x = Vector::from_fn(d.n, |_, _| rng.random_range(-0.75 * BOX..0.75 * BOX));
    let y = Vector::from_fn(d.m, |_, _| rng.random_range(0.1..2.0));
    let w = Vector::from_fn(d.m, |_, _| rng.random_range(0.1..2.0));
    let z = uniform_vec(rng, d.l);
    Iterate::new(x, y, w, z)
}

/// Feasible convex QP with a PSD (possibly singular) Hessian, returned with
/// a feasible point.
pub fn random_convex_qp<R: Rng + ?Sized>(rng: &mut R, dim: usize, neq: usize, nineq: usize) -> (QpProblem, Vector) {
    let rank = rng.random_range(1..=dim);
    let r = uniform(rng, rank, dim);
    let q = r.transpose() * &r + Mat::identity(dim, dim) * 1e-3;
    let c = uniform_vec(rng, dim) * 2.0;
    let u0 = uniform_vec(rng, dim);
    let e = uniform(rng, neq, dim);
    let e_rhs = &e * &u0;
    let a = uniform(rng, nineq, dim);
    let slack = Vector::from_fn(nineq, |_, _| rng.random_range(0.0..1.0));
    let a_rhs = &a * &u0 + slack;
    (QpProblem::new(q, c).with_equalities(e, e_rhs).with_inequalities(a, a_rhs), u0)
}
