//! Dense linear-algebra helpers shared by the sub-solvers and the algorithms.

use nalgebra::{DMatrix, DVector};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

pub fn norm_inf(v: &Vector) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Maximum absolute row sum.
pub fn mat_norm_inf(a: &Mat) -> f64 {
    a.row_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn max_abs(a: &Mat) -> f64 {
    a.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

pub fn select_rows(a: &Mat, rows: &[usize]) -> Mat {
    Mat::from_fn(rows.len(), a.ncols(), |i, j| a[(rows[i], j)])
}

pub fn select_cols(a: &Mat, cols: &[usize]) -> Mat {
    Mat::from_fn(a.nrows(), cols.len(), |i, j| a[(i, cols[j])])
}

pub fn select_entries(v: &Vector, idx: &[usize]) -> Vector {
    Vector::from_fn(idx.len(), |i, _| v[idx[i]])
}

pub fn vstack(blocks: &[&Mat]) -> Mat {
    let cols = blocks.iter().map(|b| b.ncols()).max().unwrap_or(0);
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = Mat::zeros(rows, cols);
    let mut r0 = 0;
    for b in blocks {
        if b.nrows() > 0 {
            out.view_mut((r0, 0), (b.nrows(), b.ncols())).copy_from(*b);
        }
        r0 += b.nrows();
    }
    out
}

pub fn hstack(blocks: &[&Mat]) -> Mat {
    let rows = blocks.iter().map(|b| b.nrows()).max().unwrap_or(0);
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Mat::zeros(rows, cols);
    let mut c0 = 0;
    for b in blocks {
        if b.ncols() > 0 {
            out.view_mut((0, c0), (b.nrows(), b.ncols())).copy_from(*b);
        }
        c0 += b.ncols();
    }
    out
}

pub fn concat(parts: &[&Vector]) -> Vector {
    Vector::from_iterator(
        parts.iter().map(|p| p.len()).sum(),
        parts.iter().flat_map(|p| p.iter().copied()),
    )
}

pub fn is_symmetric(a: &Mat, tol: f64) -> bool {
    a.is_square()
        && (0..a.nrows()).all(|i| (0..i).all(|j| (a[(i, j)] - a[(j, i)]).abs() <= tol))
}

/// Smallest eigenvalue of the symmetric part of `a` (0 for an empty matrix).
pub fn min_symmetric_eigenvalue(a: &Mat) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    let sym = (a + a.transpose()) * 0.5;
    sym.symmetric_eigenvalues().min()
}

/// Singular values of `a` together with the right singular vectors, padded so
/// that the full `ncols x ncols` orthogonal factor is available.
fn full_svd(a: &Mat) -> (Vec<f64>, Mat) {
    let n = a.ncols();
    let padded = if a.nrows() < n {
        let mut p = Mat::zeros(n, n);
        if a.nrows() > 0 {
            p.view_mut((0, 0), (a.nrows(), n)).copy_from(a);
        }
        p
    } else {
        a.clone()
    };
    let svd = padded.svd(false, true);
    let v = svd.v_t.expect("requested right singular vectors").transpose();
    (svd.singular_values.iter().copied().collect(), v)
}

/// Orthonormal basis of the null space of `a`: right singular directions with
/// singular value at most `rel_tol * sigma_max`.
pub fn null_space(a: &Mat, rel_tol: f64) -> Mat {
    let n = a.ncols();
    if n == 0 {
        return Mat::zeros(0, 0);
    }
    if a.nrows() == 0 {
        return Mat::identity(n, n);
    }
    let (sv, v) = full_svd(a);
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let thr = rel_tol * smax.max(f64::MIN_POSITIVE);
    let keep: Vec<usize> = (0..n).filter(|&j| sv[j] <= thr || smax == 0.0).collect();
    select_cols(&v, &keep)
}

/// Numerical rank with threshold `rel_tol * sigma_max`.
pub fn rank(a: &Mat, rel_tol: f64) -> usize {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    let sv = a.clone().singular_values();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// Minimum-norm least-squares solution of `a x = b`.
pub fn lstsq(a: &Mat, b: &Vector) -> Vector {
    if a.ncols() == 0 {
        return Vector::zeros(0);
    }
    if a.nrows() == 0 {
        return Vector::zeros(a.ncols());
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let eps = 1e-13 * smax.max(f64::MIN_POSITIVE) * (a.nrows().max(a.ncols()) as f64);
    svd.solve(b, eps).expect("both factors computed")
}

pub fn diag(v: &Vector) -> Mat {
    Mat::from_diagonal(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_space_of_wide_matrix() {
        let a = Mat::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let z = null_space(&a, 1e-12);
        assert_eq!(z.ncols(), 2);
        assert!((&a * &z).amax() < 1e-14);
    }

    #[test]
    fn rank_and_lstsq() {
        let a = Mat::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        assert_eq!(rank(&a, 1e-12), 2);
        let b = Vector::from_vec(vec![1.0, 2.0, 3.0]);
        let x = lstsq(&a, &b);
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 2.0).abs() < 1e-12);
    }
}
