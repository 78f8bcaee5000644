//! Data-parallel helpers.
//!
//! Every batch loop in the crate goes through [`map_indexed`], which returns
//! results in input order. Reductions are then done sequentially over that
//! ordered buffer, so parallel and sequential execution produce bit-identical
//! sums.

/// How batch work is scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExecPolicy {
    Sequential,
    /// Uses the rayon global pool. Falls back to sequential when the crate is
    /// built without the `parallel` feature.
    #[default]
    Parallel,
}

impl ExecPolicy {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == ExecPolicy::Parallel
    }
}

/// Maps `f` over `0..n`, preserving order.
pub fn map_indexed<T, F>(policy: ExecPolicy, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if policy.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = policy;
    (0..n).map(f).collect()
}

/// Ordered sum of equally sized vectors. Deterministic for any policy because
/// the summation order is the slice order.
pub fn ordered_sum(parts: &[Vec<f64>], len: usize) -> Vec<f64> {
    let mut acc = vec![0.0; len];
    for p in parts {
        for (a, b) in acc.iter_mut().zip(p) {
            *a += b;
        }
    }
    acc
}
