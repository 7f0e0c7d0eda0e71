use super::instance::{Iterate, MpecEvaluator};
use super::measures::{default_tolerance, index_sets};
use crate::error::{MpecError, Result};
use crate::linalg::{concat, diag, hstack, norm_inf, vstack, Mat, Vector};
use crate::subsolvers::bounded_lstsq;

/// Multipliers for the upper polyhedron (`zeta`), the lower-level equations
/// (`pi`) and complementarity (`xi`), with the residual they attain.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierSet {
    pub zeta: Vector,
    pub pi: Vector,
    pub xi: Vector,
    pub residual: f64,
}

fn stationarity_blocks<E: MpecEvaluator + ?Sized>(inst: &E, u: &Iterate, mult: &MultiplierSet) -> [Vector; 4] {
    let g = inst.objective_gradient(u);
    let j = inst.lower_jacobian(u);
    [
        &g.x - j.x.transpose() * &mult.pi + inst.upper_set().g.transpose() * &mult.zeta,
        &g.y - j.y.transpose() * &mult.pi - u.w.component_mul(&mult.xi),
        &g.w - j.w.transpose() * &mult.pi - u.y.component_mul(&mult.xi),
        &g.z - j.z.transpose() * &mult.pi,
    ]
}

fn residual_unchecked<E: MpecEvaluator + ?Sized>(inst: &E, u: &Iterate, mult: &MultiplierSet) -> f64 {
    let blocks = stationarity_blocks(inst, u, mult);
    let slack = if mult.zeta.is_empty() { 0.0 } else { mult.zeta.dot(&inst.upper_set().slack(&u.x)).abs() };
    blocks.iter().map(norm_inf).fold(slack, f64::max)
}

fn check_shapes<E: MpecEvaluator + ?Sized>(inst: &E, mult: &MultiplierSet) -> Result<()> {
    let d = inst.dims();
    if mult.zeta.len() != inst.upper_set().g.nrows() || mult.pi.len() != d.m + d.l || mult.xi.len() != d.m {
        return Err(MpecError::Dimension("multiplier lengths do not match the instance".into()));
    }
    Ok(())
}

/// Max-norm of the four gradient equations and `zeta'(a - G x)`; requires a
/// strictly complementary point.
pub fn kkt_residual<E: MpecEvaluator + ?Sized>(inst: &E, u: &Iterate, mult: &MultiplierSet) -> Result<f64> {
    check_shapes(inst, mult)?;
    if mult.zeta.iter().any(|&z| z < 0.0) {
        return Err(MpecError::Precondition("zeta must be nonnegative".into()));
    }
    let sets = index_sets(&u.y, &u.w, default_tolerance(&u.y, &u.w))?;
    if !sets.is_strictly_complementary() {
        return Err(MpecError::Degenerate);
    }
    Ok(residual_unchecked(inst, u, mult))
}

/// Bounded least-squares fit of the multiplier system: `zeta >= 0` on active
/// rows of `G x <= a`, zero on inactive rows, `pi` and `xi` free.
pub fn estimate_multipliers<E: MpecEvaluator + ?Sized>(inst: &E, u: &Iterate) -> Result<MultiplierSet> {
    let sets = index_sets(&u.y, &u.w, default_tolerance(&u.y, &u.w))?;
    if !sets.is_strictly_complementary() {
        return Err(MpecError::Degenerate);
    }
    Ok(fit_multipliers(inst, u))
}

fn fit_multipliers<E: MpecEvaluator + ?Sized>(inst: &E, u: &Iterate) -> MultiplierSet {
    let d = inst.dims();
    let (n, m, l) = (d.n, d.m, d.l);
    let k = inst.upper_set().g.nrows();
    let slack = inst.upper_set().slack(&u.x);
    let active: Vec<usize> = (0..k)
        .filter(|&i| {
            let scale = 1.0 + inst.upper_set().a[i].abs() + inst.upper_set().g.row(i).norm() * norm_inf(&u.x);
            slack[i] <= 1e-8 * scale
        })
        .collect();
    let j = inst.lower_jacobian(u);
    let g = inst.objective_gradient(u);
    let rhs = -concat(&[&g.x, &g.y, &g.w, &g.z]);

    // columns: active zeta | pi | xi
    let na = active.len();
    let mut gz = Mat::zeros(n + 2 * m + l, na);
    for (c, &i) in active.iter().enumerate() {
        for r in 0..n {
            gz[(r, c)] = inst.upper_set().g[(i, r)];
        }
    }
    let pi_cols = -vstack(&[&j.x.transpose(), &j.y.transpose(), &j.w.transpose(), &j.z.transpose()]);
    let xi_cols = -vstack(&[&Mat::zeros(n, m), &diag(&u.w), &diag(&u.y), &Mat::zeros(l, m)]);
    let a = hstack(&[&gz, &pi_cols, &xi_cols]);
    let mut nonneg = vec![false; na + m + l + m];
    nonneg[..na].iter_mut().for_each(|b| *b = true);
    let v = bounded_lstsq(&a, &rhs, &nonneg);

    let mut zeta = Vector::zeros(k);
    for (c, &i) in active.iter().enumerate() {
        zeta[i] = v[c].max(0.0);
    }
    let mut mult = MultiplierSet {
        zeta,
        pi: v.rows(na, m + l).into_owned(),
        xi: v.rows(na + m + l, m).into_owned(),
        residual: 0.0,
    };
    mult.residual = residual_unchecked(inst, u, &mult);
    mult
}

/// Stationarity measure for the end point of an interior method on a general
/// instance: each pair is snapped to its dominant axis and the multiplier
/// system is fitted there. Returns the attained residual.
pub fn projected_stationarity<E: MpecEvaluator + ?Sized>(inst: &E, u: &Iterate) -> f64 {
    let mut p = u.clone();
    for i in 0..u.y.len() {
        if u.y[i] >= u.w[i] {
            p.w[i] = 0.0;
        } else {
            p.y[i] = 0.0;
        }
    }
    fit_multipliers(inst, &p).residual
}
