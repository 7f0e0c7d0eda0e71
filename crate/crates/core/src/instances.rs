//! The three worked instances bundled with the crate.

use crate::linalg::{Mat, Vector};
use crate::model::{Dims, Iterate, LowerLevel, MpecInstance, Objective, UpperSet};

fn scalar(v: f64) -> Mat {
    Mat::from_element(1, 1, v)
}

fn vec1(v: f64) -> Vector {
    Vector::from_element(1, v)
}

/// `F = x + y - w` with a zero objective and no upper constraints, evaluated
/// at `(1, 0, 0)`.
pub fn problem1() -> MpecInstance {
    let d = Dims { n: 1, m: 1, l: 0 };
    MpecInstance {
        dims: d,
        objective: Objective::zero(d),
        lower: LowerLevel::Affine {
            ax: scalar(1.0),
            ay: scalar(1.0),
            aw: scalar(-1.0),
            az: Mat::zeros(1, 0),
            b: vec1(0.0),
        },
        upper: UpperSet { g: Mat::zeros(0, 1), a: Vector::zeros(0) },
        start: Some(Iterate::from_slices(&[1.0], &[0.0], &[0.0], &[])),
    }
}

/// `min 1/2 x^2 + x y + y^2` s.t. `x >= 0`, `w = -2 + x + y`, started from the
/// interior point `(1, 2, 1)`.
pub fn problem2() -> MpecInstance {
    let d = Dims { n: 1, m: 1, l: 0 };
    let mut objective = Objective::zero(d);
    objective.hxx = scalar(1.0);
    objective.hxy = scalar(1.0);
    objective.hyy = scalar(2.0);
    MpecInstance {
        dims: d,
        objective,
        lower: LowerLevel::Lcp { q: vec1(-2.0), n_mat: scalar(1.0), m_mat: scalar(1.0) },
        upper: UpperSet { g: scalar(-1.0), a: vec1(0.0) },
        start: Some(Iterate::from_slices(&[1.0], &[2.0], &[1.0], &[])),
    }
}

/// `min x^2 - y` over `x in [-1, 1]` with `y = max(0, x)` as the lower-level
/// solution. No start is stored; the default `x = 0` is the kink.
pub fn problem3() -> MpecInstance {
    let d = Dims { n: 1, m: 1, l: 0 };
    let mut objective = Objective::zero(d);
    objective.hxx = scalar(2.0);
    objective.cy = vec1(-1.0);
    MpecInstance {
        dims: d,
        objective,
        lower: LowerLevel::Lcp { q: vec1(0.0), n_mat: scalar(-1.0), m_mat: scalar(1.0) },
        upper: UpperSet { g: Mat::from_column_slice(2, 1, &[1.0, -1.0]), a: Vector::from_column_slice(&[1.0, 1.0]) },
        start: None,
    }
}
