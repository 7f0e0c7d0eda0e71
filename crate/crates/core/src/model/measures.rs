use serde::{Deserialize, Serialize};

use super::instance::{Gradient, Iterate, MpecEvaluator, MpecInstance};
use crate::error::{MpecError, Result};
use crate::linalg::Vector;

/// Partition of `{0..m}` at a point: `alpha` has `y_i > 0 = w_i`, `gamma` has
/// `w_i > 0 = y_i` and `beta` is the degenerate set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexSets {
    pub alpha: Vec<usize>,
    pub beta: Vec<usize>,
    pub gamma: Vec<usize>,
    pub tol: f64,
}

impl IndexSets {
    pub fn is_strictly_complementary(&self) -> bool {
        self.beta.is_empty()
    }

    pub fn len(&self) -> usize {
        self.alpha.len() + self.beta.len() + self.gamma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Scale-aware classification tolerance `1e-8 (1 + ||(y, w)||_inf)`.
pub fn default_tolerance(y: &Vector, w: &Vector) -> f64 {
    let scale = y.iter().chain(w.iter()).fold(0.0_f64, |a, v| a.max(v.abs()));
    1e-8 * (1.0 + scale)
}

pub fn index_sets(y: &Vector, w: &Vector, tol: f64) -> Result<IndexSets> {
    if y.len() != w.len() {
        return Err(MpecError::Dimension("y and w must have equal length".into()));
    }
    if y.iter().chain(w.iter()).any(|&v| v < -tol) {
        return Err(MpecError::NegativeVariables);
    }
    let mut sets = IndexSets { alpha: vec![], beta: vec![], gamma: vec![], tol };
    for i in 0..y.len() {
        match (y[i] > tol, w[i] > tol) {
            (true, true) => return Err(MpecError::NotComplementary(i)),
            (true, false) => sets.alpha.push(i),
            (false, true) => sets.gamma.push(i),
            (false, false) => sets.beta.push(i),
        }
    }
    Ok(sets)
}

pub fn strict_complementarity(y: &Vector, w: &Vector, tol: f64) -> Result<bool> {
    Ok(index_sets(y, w, tol)?.is_strictly_complementary())
}

fn check_nonnegative(u: &Iterate) -> Result<()> {
    if u.y.iter().chain(u.w.iter()).any(|&v| v < 0.0) {
        Err(MpecError::NegativeVariables)
    } else {
        Ok(())
    }
}

/// `||F||^2 + y'w`.
pub fn phi_general<E: MpecEvaluator + ?Sized>(eval: &E, u: &Iterate) -> Result<f64> {
    check_nonnegative(u)?;
    Ok(eval.lower_residual(u).norm_squared() + u.y.dot(&u.w))
}

/// Gradient of `||F||^2 + y'w`.
pub fn phi_general_gradient<E: MpecEvaluator + ?Sized>(eval: &E, u: &Iterate) -> Gradient {
    let f = eval.lower_residual(u);
    let j = eval.lower_jacobian(u);
    Gradient {
        x: j.x.transpose() * &f * 2.0,
        y: j.y.transpose() * &f * 2.0 + &u.w,
        w: j.w.transpose() * &f * 2.0 + &u.y,
        z: j.z.transpose() * &f * 2.0,
    }
}

/// `r = q + N x + M y - w`.
pub fn lcp_residual(inst: &MpecInstance, x: &Vector, y: &Vector, w: &Vector) -> Result<Vector> {
    let (q, n, m) = inst.lcp_data()?;
    Ok(q + n * x + m * y - w)
}

/// `y'w + ||r||` (norm, not squared).
pub fn phi_lcp(inst: &MpecInstance, u: &Iterate) -> Result<f64> {
    let r = lcp_residual(inst, &u.x, &u.y, &u.w)?;
    check_nonnegative(u)?;
    Ok(u.y.dot(&u.w) + r.norm())
}

/// Which infeasibility measure to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiKind {
    /// `||F||^2 + y'w`
    Squared,
    /// `y'w + ||r||`, LCP form only
    Norm,
}

pub fn phi(inst: &MpecInstance, u: &Iterate, kind: PhiKind) -> Result<f64> {
    match kind {
        PhiKind::Squared => phi_general(inst, u),
        PhiKind::Norm => phi_lcp(inst, u),
    }
}

/// `f + alpha * phi` with the measure matching the instance form.
pub fn penalty_value(inst: &MpecInstance, u: &Iterate, alpha: f64) -> Result<f64> {
    let kind = if inst.is_lcp() { PhiKind::Norm } else { PhiKind::Squared };
    penalty_value_with(inst, u, alpha, kind)
}

pub fn penalty_value_with(inst: &MpecInstance, u: &Iterate, alpha: f64, kind: PhiKind) -> Result<f64> {
    if alpha <= 0.0 {
        return Err(MpecError::Precondition("penalty parameter must be positive".into()));
    }
    Ok(inst.objective_value(u) + alpha * phi(inst, u, kind)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances;

    fn v(s: &[f64]) -> Vector {
        Vector::from_column_slice(s)
    }

    #[test]
    fn classification() {
        let s = index_sets(&v(&[0.0]), &v(&[0.0]), 1e-8).unwrap();
        assert_eq!((s.alpha.len(), s.beta, s.gamma.len()), (0, vec![0], 0));
        let s = index_sets(&v(&[1.0]), &v(&[0.0]), 1e-8).unwrap();
        assert_eq!(s.alpha, vec![0]);
        let s = index_sets(&v(&[0.0, 2.0]), &v(&[3.0, 0.0]), 1e-8).unwrap();
        assert_eq!((s.gamma, s.alpha), (vec![0], vec![1]));
        assert!(matches!(index_sets(&v(&[1.0]), &v(&[1.0]), 1e-8), Err(MpecError::NotComplementary(0))));
    }

    #[test]
    fn strictness() {
        assert!(!strict_complementarity(&v(&[0.0]), &v(&[0.0]), 1e-8).unwrap());
        assert!(strict_complementarity(&v(&[1.0]), &v(&[0.0]), 1e-8).unwrap());
        assert!(!strict_complementarity(&v(&[0.0, 1.0]), &v(&[0.0, 0.0]), 1e-8).unwrap());
    }

    #[test]
    fn problem_two_measures() {
        let inst = instances::problem2();
        let u = Iterate::from_slices(&[1.0], &[2.0], &[1.0], &[]);
        assert_eq!(phi_lcp(&inst, &u).unwrap(), 2.0);
        assert_eq!(inst.objective_value(&u), 6.5);
        assert_eq!(penalty_value(&inst, &u, 10.0).unwrap(), 26.5);
    }

    #[test]
    fn general_phi_formula() {
        // F = x + y - w = 1, y'w = 2
        let inst = instances::problem1();
        let u = Iterate::from_slices(&[1.0], &[2.0], &[1.0], &[]);
        assert!((phi_general(&inst, &u).unwrap() - (4.0 + 2.0)).abs() < 1e-15);
        let u = Iterate::from_slices(&[0.0], &[1.0], &[0.0], &[]);
        assert_eq!(phi_general(&inst, &u).unwrap(), 1.0);
        let neg = Iterate::from_slices(&[0.0], &[-1.0], &[0.0], &[]);
        assert!(matches!(phi_general(&inst, &neg), Err(MpecError::NegativeVariables)));
    }

    #[test]
    fn lcp_form_required() {
        let inst = instances::problem1();
        let u = Iterate::from_slices(&[1.0], &[0.0], &[0.0], &[]);
        assert!(matches!(phi_lcp(&inst, &u), Err(MpecError::WrongForm)));
    }
}
