use crate::linalg::{lstsq, select_cols, Mat, Vector};

/// Least squares `min ||A v - b||` with `v_i >= 0` for `i` in `nonneg`
/// (Lawson-Hanson active set, free variables kept in the passive set).
pub fn bounded_lstsq(a: &Mat, b: &Vector, nonneg: &[bool]) -> Vector {
    let n = a.ncols();
    assert_eq!(nonneg.len(), n);
    let mut passive: Vec<bool> = nonneg.iter().map(|&c| !c).collect();
    let solve_passive = |passive: &[bool]| -> Vector {
        let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
        let mut s = Vector::zeros(n);
        if !idx.is_empty() {
            let sub = lstsq(&select_cols(a, &idx), b);
            for (k, &j) in idx.iter().enumerate() {
                s[j] = sub[k];
            }
        }
        s
    };
    let mut v = solve_passive(&passive);
    let tol = 1e-12 * (1.0 + a.amax() * (1.0 + b.amax()));
    for _ in 0..(3 * n + 10) {
        let grad = a.transpose() * (b - a * &v);
        let candidate = (0..n)
            .filter(|&j| nonneg[j] && !passive[j] && grad[j] > tol)
            .max_by(|&i, &j| grad[i].total_cmp(&grad[j]).then(j.cmp(&i)));
        let Some(t) = candidate else { break };
        passive[t] = true;
        loop {
            let s = solve_passive(&passive);
            let blocking: Vec<usize> = (0..n).filter(|&j| nonneg[j] && passive[j] && s[j] <= 0.0).collect();
            if blocking.is_empty() {
                v = s;
                break;
            }
            let alpha = blocking
                .iter()
                .map(|&j| {
                    let den = v[j] - s[j];
                    if den > 0.0 { v[j] / den } else { 0.0 }
                })
                .fold(1.0_f64, f64::min);
            v += (s - &v) * alpha;
            for j in 0..n {
                if nonneg[j] && passive[j] && v[j] <= tol {
                    passive[j] = false;
                    v[j] = 0.0;
                }
            }
            if !passive.iter().enumerate().any(|(j, &p)| p && nonneg[j]) {
                v = solve_passive(&passive);
                break;
            }
        }
    }
    v
}
