//! Linear complementarity: `y >= 0, w = M y + q >= 0, y'w = 0`.
//!
//! Lemke's complementary pivoting (covering vector of ones, lexicographic
//! ratio test) is tried first; on ray termination or a failed verification
//! every complementary pattern is enumerated.

use crate::error::{MpecError, Result};
use crate::linalg::{norm_inf, select_cols, select_entries, select_rows, Mat, Vector};
use crate::par::{self, mask_members, Execution};
use crate::subsolvers::solve_linear;

pub const ENUMERATION_LIMIT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LcpMethod {
    Trivial,
    Lemke,
    Enumeration,
}

#[derive(Debug, Clone)]
pub struct LcpSolution {
    pub y: Vector,
    pub w: Vector,
    pub method: LcpMethod,
    pub pivots: usize,
}

fn tolerance(q: &Vector) -> f64 {
    1e-10 * (1.0 + norm_inf(q))
}

/// Builds the solution for a pattern `basic` (indices with `w_i = 0`) and
/// accepts it when all three LCP conditions hold.
fn pattern_solution(m: &Mat, q: &Vector, basic: &[usize]) -> Option<(Vector, Vector)> {
    let n = q.len();
    let tol = tolerance(q);
    let mut y = Vector::zeros(n);
    if !basic.is_empty() {
        let sub = select_cols(&select_rows(m, basic), basic);
        let rhs = -select_entries(q, basic);
        let ys = solve_linear(&sub, &rhs).ok()?;
        for (k, &i) in basic.iter().enumerate() {
            if ys[k] < -tol {
                return None;
            }
            y[i] = ys[k].max(0.0);
        }
    }
    let mut w = m * &y + q;
    for &i in basic {
        if w[i].abs() > tol * (1.0 + norm_inf(&y)) {
            return None;
        }
        w[i] = 0.0;
    }
    if w.iter().any(|&v| v < -tol) {
        return None;
    }
    w.apply(|v| *v = v.max(0.0));
    Some((y, w))
}

/// Exhaustive search over the `2^m` complementary patterns; the pattern with
/// the smallest bitmask wins.
pub fn solve_lcp_by_enumeration(m: &Mat, q: &Vector, exec: Execution) -> Result<LcpSolution> {
    let n = q.len();
    if n > ENUMERATION_LIMIT {
        return Err(MpecError::DimensionTooLarge(n, ENUMERATION_LIMIT));
    }
    par::find_first(exec, 1usize << n, |mask| pattern_solution(m, q, &mask_members(mask, n)))
        .map(|(_, (y, w))| LcpSolution { y, w, method: LcpMethod::Enumeration, pivots: 0 })
        .ok_or(MpecError::NoSolution)
}

/// Lemke's algorithm. Returns `Ok(None)` on ray termination.
pub fn solve_lcp_lemke(m: &Mat, q: &Vector) -> Result<Option<LcpSolution>> {
    let n = q.len();
    if m.nrows() != n || m.ncols() != n {
        return Err(MpecError::Dimension("LCP matrix must be square and match q".into()));
    }
    if q.iter().all(|&v| v >= 0.0) {
        return Ok(Some(LcpSolution { y: Vector::zeros(n), w: q.clone(), method: LcpMethod::Trivial, pivots: 0 }));
    }
    // columns: w (0..n), y (n..2n), z0 (2n), rhs (2n+1); w - M y - e z0 = q
    let z0 = 2 * n;
    let rhs = 2 * n + 1;
    let mut t = Mat::zeros(n, 2 * n + 2);
    for i in 0..n {
        t[(i, i)] = 1.0;
        for j in 0..n {
            t[(i, n + j)] = -m[(i, j)];
        }
        t[(i, z0)] = -1.0;
        t[(i, rhs)] = q[i];
    }
    let mut basis: Vec<usize> = (0..n).collect();
    let eps = 1e-12 * (1.0 + m.amax());

    let pivot = |t: &mut Mat, r: usize, col: usize| {
        let p = t[(r, col)];
        let row = t.row(r) / p;
        t.set_row(r, &row);
        for i in 0..t.nrows() {
            if i != r {
                let f = t[(i, col)];
                if f != 0.0 {
                    let upd = t.row(i) - &row * f;
                    t.set_row(i, &upd);
                }
            }
        }
    };

    // first pivot: z0 enters on the row with the most negative q (lexicographic ties)
    let mut r = 0;
    for i in 1..n {
        let better = t[(i, rhs)] < t[(r, rhs)] - eps
            || ((t[(i, rhs)] - t[(r, rhs)]).abs() <= eps && lex_less(&t, i, r, n, None));
        if better {
            r = i;
        }
    }
    pivot(&mut t, r, z0);
    let mut leaving = basis[r];
    basis[r] = z0;
    let max_pivots = 50 * (n + 1) * (n + 1) + 1000;
    let mut pivots = 1;

    loop {
        let entering = if leaving < n { leaving + n } else { leaving - n };
        // lexicographic minimum ratio test
        let mut best: Option<usize> = None;
        for i in 0..n {
            let a = t[(i, entering)];
            if a <= eps {
                continue;
            }
            best = Some(match best {
                None => i,
                Some(b) => {
                    let ri = t[(i, rhs)] / a;
                    let rb = t[(b, rhs)] / t[(b, entering)];
                    let scale = 1.0 + ri.abs().max(rb.abs());
                    if ri < rb - 1e-12 * scale {
                        i
                    } else if (ri - rb).abs() <= 1e-12 * scale {
                        if basis[i] == z0 {
                            i
                        } else if basis[b] == z0 {
                            b
                        } else if lex_less(&t, i, b, n, Some(entering)) {
                            i
                        } else {
                            b
                        }
                    } else {
                        b
                    }
                }
            });
        }
        let Some(r) = best else { return Ok(None) };
        pivot(&mut t, r, entering);
        leaving = basis[r];
        basis[r] = entering;
        pivots += 1;
        if leaving == z0 {
            break;
        }
        if pivots > max_pivots {
            return Ok(None);
        }
    }

    let basic_y: Vec<usize> = basis.iter().filter(|&&b| b >= n && b < 2 * n).map(|&b| b - n).collect();
    if let Some((y, w)) = pattern_solution(m, q, &basic_y) {
        return Ok(Some(LcpSolution { y, w, method: LcpMethod::Lemke, pivots }));
    }
    // fall back to the raw tableau values when the polished system is ill-conditioned
    let mut y = Vector::zeros(n);
    for (i, &b) in basis.iter().enumerate() {
        if (n..2 * n).contains(&b) {
            y[b - n] = t[(i, rhs)].max(0.0);
        }
    }
    let w = m * &y + q;
    if verify(m, q, &y, &w) {
        let w = w.map(|v| v.max(0.0));
        return Ok(Some(LcpSolution { y, w, method: LcpMethod::Lemke, pivots }));
    }
    Ok(None)
}

/// Row comparison on `(B^-1 rows) / pivot column` for the lexicographic rule.
fn lex_less(t: &Mat, i: usize, j: usize, n: usize, col: Option<usize>) -> bool {
    let (di, dj) = match col {
        Some(c) => (t[(i, c)], t[(j, c)]),
        None => (1.0, 1.0),
    };
    for k in 0..n {
        let a = t[(i, k)] / di;
        let b = t[(j, k)] / dj;
        if (a - b).abs() > 1e-14 * (1.0 + a.abs().max(b.abs())) {
            return a < b;
        }
    }
    i < j
}

fn verify(m: &Mat, q: &Vector, y: &Vector, w: &Vector) -> bool {
    let tol = tolerance(q);
    y.iter().all(|&v| v >= -tol)
        && w.iter().all(|&v| v >= -tol)
        && y.dot(w).abs() <= tol
        && norm_inf(&(m * y + q - w)) <= tol * (1.0 + norm_inf(y))
}

/// Lemke first, exhaustive enumeration as the fallback.
pub fn solve_lcp(m: &Mat, q: &Vector) -> Result<LcpSolution> {
    solve_lcp_with(m, q, Execution::default())
}

pub fn solve_lcp_with(m: &Mat, q: &Vector, exec: Execution) -> Result<LcpSolution> {
    if let Some(sol) = solve_lcp_lemke(m, q)? {
        return Ok(sol);
    }
    solve_lcp_by_enumeration(m, q, exec)
}
