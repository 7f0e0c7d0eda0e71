use crate::error::{MpecError, Result};
use crate::linalg::{mat_norm_inf, Mat, Vector};

fn factor(a: &Mat) -> Result<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>> {
    if !a.is_square() {
        return Err(MpecError::Dimension(format!(
            "solve_linear needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let scale = mat_norm_inf(a);
    let lu = a.clone().lu();
    let u = lu.u();
    let pivot_floor = 1e-12 * scale;
    if scale == 0.0 && a.nrows() > 0 {
        return Err(MpecError::Singular);
    }
    if (0..a.nrows()).any(|i| u[(i, i)].abs() < pivot_floor) {
        return Err(MpecError::Singular);
    }
    Ok(lu)
}

/// Solves `a x = b` by LU with partial pivoting.
///
/// Fails with `Singular` when a pivot falls below `1e-12 * ||a||_inf`.
pub fn solve_linear(a: &Mat, b: &Vector) -> Result<Vector> {
    if a.nrows() != b.len() {
        return Err(MpecError::Dimension("rhs length".into()));
    }
    if a.nrows() == 0 {
        return Ok(Vector::zeros(0));
    }
    let lu = factor(a)?;
    let mut x = lu.solve(b).ok_or(MpecError::Singular)?;
    // one step of iterative refinement keeps the residual at roundoff level
    let r = b - a * &x;
    if let Some(dx) = lu.solve(&r) {
        x += dx;
    }
    let res = (a * &x - b).norm();
    if !res.is_finite() || res > 1e-10 * (1.0 + b.norm()) * (1.0 + mat_norm_inf(a)) {
        return Err(MpecError::Singular);
    }
    Ok(x)
}

/// Solves `a X = B` for several right-hand sides with one factorization.
pub fn solve_linear_multi(a: &Mat, b: &Mat) -> Result<Mat> {
    if a.nrows() != b.nrows() {
        return Err(MpecError::Dimension("rhs rows".into()));
    }
    if a.nrows() == 0 {
        return Ok(Mat::zeros(0, b.ncols()));
    }
    let lu = factor(a)?;
    let mut x = lu.solve(b).ok_or(MpecError::Singular)?;
    let r = b - a * &x;
    if let Some(dx) = lu.solve(&r) {
        x += dx;
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_returns_rhs() {
        let b = Vector::from_vec(vec![3.0, -1.5, 2.25]);
        let x = solve_linear(&Mat::identity(3, 3), &b).unwrap();
        assert_eq!(x, b);
    }

    #[test]
    fn lower_block_of_problem_two() {
        // [[W, Y], [M, -I]] (dy, dw) = (-1, -dx) at dx = 1/3
        let a = Mat::from_row_slice(2, 2, &[1.0, 2.0, 1.0, -1.0]);
        let b = Vector::from_vec(vec![-1.0, -1.0 / 3.0]);
        let x = solve_linear(&a, &b).unwrap();
        assert!((x[0] + 5.0 / 9.0).abs() < 1e-15);
        assert!((x[1] + 2.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn singular_matrix_rejected() {
        let a = Mat::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let b = Vector::from_vec(vec![1.0, 2.0]);
        assert!(matches!(solve_linear(&a, &b), Err(MpecError::Singular)));
    }
}
