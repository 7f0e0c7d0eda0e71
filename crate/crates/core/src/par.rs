//! Execution policy for the enumeration kernels.
//!
//! Every 2^k enumeration in the crate (complementarity patterns, column
//! representatives, directional branches) goes through these helpers so the
//! reduction order is fixed regardless of how the work is scheduled.

/// How an enumeration kernel schedules its independent pieces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Uses rayon when the `parallel` feature is enabled, otherwise falls back
    /// to sequential evaluation.
    #[default]
    Parallel,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Evaluates `f` on `0..count` and returns the results in index order.
pub fn map_indexed<T, F>(exec: Execution, count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..count).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..count).map(f).collect()
}

/// Smallest index in `0..count` for which `f` returns `Some`, with its value.
pub fn find_first<T, F>(exec: Execution, count: usize, f: F) -> Option<(usize, T)>
where
    T: Send,
    F: Fn(usize) -> Option<T> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..count)
            .into_par_iter()
            .filter_map(|i| f(i).map(|v| (i, v)))
            .find_first(|_| true);
    }
    let _ = exec;
    (0..count).find_map(|i| f(i).map(|v| (i, v)))
}

/// True iff `f` holds for every index in `0..count`.
pub fn all<F>(exec: Execution, count: usize, f: F) -> bool
where
    F: Fn(usize) -> bool + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..count).into_par_iter().all(f);
    }
    let _ = exec;
    (0..count).all(f)
}

/// Indices of the set bits of `mask` among the first `len` positions.
pub(crate) fn mask_members(mask: usize, len: usize) -> Vec<usize> {
    (0..len).filter(|i| mask >> i & 1 == 1).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn find_first_is_order_stable() {
        for exec in [Execution::Sequential, Execution::Parallel] {
            let hit = find_first(exec, 1000, |i| (i % 7 == 3 && i > 100).then_some(i * 2));
            assert_eq!(hit, Some((101, 202)));
        }
    }

    #[test]
    fn map_keeps_index_order() {
        let v = map_indexed(Execution::Parallel, 64, |i| i * i);
        assert!(v.iter().enumerate().all(|(i, &x)| x == i * i));
    }
}
