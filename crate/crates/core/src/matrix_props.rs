//! Regularity checks on the linearized lower level: the W property of a
//! matrix pair, the mixed P property of a partitioned matrix `[A B C]`, and
//! the piecewise-linear map `(dy, dw) -> (Jy dy + Jw dw, min(dy, dw))`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{MpecError, Result};
use crate::linalg::{hstack, mat_norm_inf, null_space, rank, select_cols, select_rows, Mat, Vector};
use crate::model::{default_tolerance, index_sets, Iterate, MpecEvaluator, MpecInstance};
use crate::par::{self, mask_members, Execution};
use crate::subsolvers::solve_linear;

/// Largest dimension for which the `2^d` enumerations are attempted.
pub const PROPERTY_LIMIT: usize = 20;

const RANK_TOL: f64 = 1e-10;

/// `[A B C]` with `A, B` of width `m` and `C` of width `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionedMatrix {
    pub a: Mat,
    pub b: Mat,
    pub c: Mat,
}

impl PartitionedMatrix {
    pub fn new(a: Mat, b: Mat, c: Mat) -> Result<Self> {
        let rows = a.nrows();
        if b.nrows() != rows || c.nrows() != rows || a.ncols() != b.ncols() {
            return Err(MpecError::Dimension("partitioned blocks must share rows and A, B widths".into()));
        }
        Ok(PartitionedMatrix { a, b, c })
    }

    pub fn m(&self) -> usize {
        self.a.ncols()
    }

    /// Columns of `A` on `alpha`, of `B` off `alpha`, then all of `C`.
    pub fn representative(&self, alpha: &[usize]) -> Mat {
        let rest: Vec<usize> = (0..self.m()).filter(|i| !alpha.contains(i)).collect();
        hstack(&[&select_cols(&self.a, alpha), &select_cols(&self.b, &rest), &self.c])
    }
}

/// Square matrices of equal size.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixPair {
    pub w0: Mat,
    pub w1: Mat,
}

impl MatrixPair {
    pub fn new(w0: Mat, w1: Mat) -> Result<Self> {
        if !w0.is_square() || w0.shape() != w1.shape() {
            return Err(MpecError::Dimension("matrix pair must be square and equal size".into()));
        }
        Ok(MatrixPair { w0, w1 })
    }

    pub fn dim(&self) -> usize {
        self.w0.nrows()
    }

    /// Column `i` from `w1` when bit `i` of `mask` is set, else from `w0`.
    pub fn representative(&self, mask: usize) -> Mat {
        let mut r = self.w0.clone();
        for i in mask_members(mask, self.dim()) {
            r.set_column(i, &self.w1.column(i));
        }
        r
    }
}

pub fn has_w_property(pair: &MatrixPair) -> Result<bool> {
    has_w_property_with(pair, Execution::default())
}

/// True iff every one of the `2^d` column representatives has a determinant
/// of the same strict sign; `|det| <= 1e-12 * scale^d` counts as zero.
pub fn has_w_property_with(pair: &MatrixPair, exec: Execution) -> Result<bool> {
    let d = pair.dim();
    if d > PROPERTY_LIMIT {
        return Err(MpecError::DimensionTooLarge(d, PROPERTY_LIMIT));
    }
    if d == 0 {
        return Ok(true);
    }
    let scale = mat_norm_inf(&pair.w0).max(mat_norm_inf(&pair.w1));
    if scale == 0.0 {
        return Ok(false);
    }
    let thr = 1e-12 * scale.powi(d as i32);
    let sign = |mask: usize| -> i8 {
        let det = pair.representative(mask).determinant();
        if det.abs() <= thr {
            0
        } else if det > 0.0 {
            1
        } else {
            -1
        }
    };
    let first = sign(0);
    if first == 0 {
        return Ok(false);
    }
    Ok(par::all(exec, 1 << d, |mask| sign(mask) == first))
}

fn full_rank(a: &Mat) -> bool {
    a.ncols() == 0 || rank(a, RANK_TOL) == a.ncols()
}

pub fn mixed_p_necessary(q: &PartitionedMatrix) -> Result<bool> {
    mixed_p_necessary_with(q, Execution::default())
}

/// `C` has full column rank and every `[A_alpha B_rest C]` is nonsingular.
/// This is a necessary condition for the mixed P property, not a decision
/// procedure for it.
pub fn mixed_p_necessary_with(q: &PartitionedMatrix, exec: Execution) -> Result<bool> {
    let m = q.m();
    if m > PROPERTY_LIMIT {
        return Err(MpecError::DimensionTooLarge(m, PROPERTY_LIMIT));
    }
    if q.a.nrows() != m + q.c.ncols() || !full_rank(&q.c) {
        return Ok(false);
    }
    Ok(par::all(exec, 1 << m, |mask| full_rank(&q.representative(&mask_members(mask, m)))))
}

/// Nonzero `(r, s, t)` with `A r + B s + C t = 0` and `r_i s_i <= 0` for all `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedPWitness {
    pub r: Vector,
    pub s: Vector,
    pub t: Vector,
}

impl MixedPWitness {
    pub fn is_valid(&self, q: &PartitionedMatrix, tol: f64) -> bool {
        let scale = self.r.norm() + self.s.norm() + self.t.norm();
        if scale == 0.0 {
            return false;
        }
        let res = &q.a * &self.r + &q.b * &self.s + &q.c * &self.t;
        res.norm() <= tol * scale * (1.0 + mat_norm_inf(&hstack(&[&q.a, &q.b, &q.c])))
            && self.r.iter().zip(self.s.iter()).all(|(r, s)| r * s <= tol * scale * scale)
    }
}

/// Searches for a violation of the mixed P implication. Singular column
/// representatives are probed first (their null vectors give `r o s = 0`);
/// then `samples` random combinations of the null space of `[A B C]` are
/// tried. Returning `None` proves nothing.
pub fn mixed_p_falsify(q: &PartitionedMatrix, samples: usize, seed: u64) -> Option<MixedPWitness> {
    let m = q.m();
    let l = q.c.ncols();
    if m <= PROPERTY_LIMIT {
        let probe = |mask: usize| {
            let alpha = mask_members(mask, m);
            let rest: Vec<usize> = (0..m).filter(|i| !alpha.contains(i)).collect();
            let ns = null_space(&q.representative(&alpha), RANK_TOL);
            if ns.ncols() == 0 {
                return None;
            }
            let v = ns.column(0);
            let mut w = MixedPWitness { r: Vector::zeros(m), s: Vector::zeros(m), t: Vector::zeros(l) };
            for (k, &i) in alpha.iter().enumerate() {
                w.r[i] = v[k];
            }
            for (k, &i) in rest.iter().enumerate() {
                w.s[i] = v[alpha.len() + k];
            }
            w.t.copy_from(&v.rows(m, l));
            Some(w)
        };
        if let Some((_, w)) = par::find_first(Execution::Sequential, 1 << m, probe) {
            return Some(w);
        }
    }
    let full = hstack(&[&q.a, &q.b, &q.c]);
    let ns = null_space(&full, RANK_TOL);
    if ns.ncols() == 0 {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        let coef = Vector::from_fn(ns.ncols(), |_, _| rng.random_range(-1.0..1.0));
        let v = &ns * coef;
        let w = MixedPWitness {
            r: v.rows(0, m).into_owned(),
            s: v.rows(m, m).into_owned(),
            t: v.rows(2 * m, l).into_owned(),
        };
        if w.r.iter().zip(w.s.iter()).all(|(r, s)| r * s <= 0.0) && v.norm() > 0.0 {
            return Some(w);
        }
    }
    None
}

/// `(Jy dy + Jw dw, min(dy, dw))`.
pub fn lh_star_eval(dfy: &Mat, dfw: &Mat, dy: &Vector, dw: &Vector) -> (Vector, Vector) {
    let lin = dfy * dy + dfw * dw;
    let mins = dy.zip_map(dw, f64::min);
    (lin, mins)
}

/// The pair whose W property decides injectivity: the piece `min = dy`
/// contributes `Jy`, the piece `min = dw` contributes `-Jw`.
pub fn lh_star_pair(dfy: &Mat, dfw: &Mat) -> Result<MatrixPair> {
    MatrixPair::new(dfy.clone(), -dfw)
}

pub fn lh_star_is_homeomorphism(dfy: &Mat, dfw: &Mat) -> Result<bool> {
    has_w_property(&lh_star_pair(dfy, dfw)?)
}

/// All preimages of `(lin, mins)` under the map, one candidate per piece
/// (bit `i` set means `min` is attained by `dw_i`). Duplicates arising on
/// piece boundaries are merged.
pub fn lh_star_preimages(dfy: &Mat, dfw: &Mat, lin: &Vector, mins: &Vector) -> Vec<(Vector, Vector)> {
    let d = mins.len();
    let mut out: Vec<(Vector, Vector)> = Vec::new();
    for mask in 0..(1usize << d) {
        // unknown i is dw_i when min = dy_i, and dy_i otherwise
        let mut base_y = Vector::zeros(d);
        let mut base_w = Vector::zeros(d);
        let mut cols = Mat::zeros(d, d);
        for i in 0..d {
            if mask >> i & 1 == 0 {
                base_y[i] = mins[i];
                cols.set_column(i, &dfw.column(i));
            } else {
                base_w[i] = mins[i];
                cols.set_column(i, &dfy.column(i));
            }
        }
        let rhs = lin - dfy * &base_y - dfw * &base_w;
        let Ok(u) = solve_linear(&cols, &rhs) else { continue };
        let tol = 1e-10 * (1.0 + mins.amax() + u.amax());
        let mut dy = base_y;
        let mut dw = base_w;
        let mut ok = true;
        for i in 0..d {
            if mask >> i & 1 == 0 {
                dw[i] = u[i];
                ok &= u[i] >= mins[i] - tol;
            } else {
                dy[i] = u[i];
                ok &= u[i] >= mins[i] - tol;
            }
        }
        if ok && !out.iter().any(|(a, b)| (a - &dy).amax() <= 1e-8 * (1.0 + dy.amax()) && (b - &dw).amax() <= 1e-8 * (1.0 + dw.amax())) {
            out.push((dy, dw));
        }
    }
    out
}

/// The blocks `(Jy_beta, Jw_beta)` of the linearized lower level at `u`
/// after eliminating the smooth variables (`y_alpha`, `w_gamma`, `z`).
/// `None` when those smooth columns are rank deficient.
pub fn reduced_lh_blocks(inst: &MpecInstance, u: &Iterate) -> Result<Option<(Mat, Mat)>> {
    let sets = index_sets(&u.y, &u.w, default_tolerance(&u.y, &u.w))?;
    let j = inst.lower_jacobian(u);
    let smooth = hstack(&[&select_cols(&j.y, &sets.alpha), &select_cols(&j.w, &sets.gamma), &j.z]);
    if !full_rank(&smooth) {
        return Ok(None);
    }
    let rows = j.y.nrows();
    let left = if smooth.ncols() == 0 {
        Mat::identity(rows, rows)
    } else {
        null_space(&smooth.transpose(), RANK_TOL)
    };
    if left.ncols() != sets.beta.len() {
        return Ok(None);
    }
    let lt = left.transpose();
    let all: Vec<usize> = (0..rows).collect();
    let jy = select_rows(&select_cols(&j.y, &sets.beta), &all);
    let jw = select_cols(&j.w, &sets.beta);
    Ok(Some((&lt * jy, &lt * jw)))
}

/// `[Jy Jw Jz]` of the lower level as a partitioned matrix.
pub fn lower_partition(inst: &MpecInstance, u: &Iterate) -> Result<PartitionedMatrix> {
    let j = inst.lower_jacobian(u);
    PartitionedMatrix::new(j.y, j.w, j.z)
}
