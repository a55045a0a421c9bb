//! Thin switch between rayon data parallelism and plain iteration.
//!
//! Every helper has identical semantics under both builds: deterministic
//! output independent of scheduling. The `parallel` feature (default) routes
//! through rayon; without it the same code paths run sequentially.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `0..len` and collects in index order.
#[cfg(feature = "parallel")]
pub(crate) fn map_indexed<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..len).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_indexed<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..len).map(f).collect()
}

/// First `Some` produced over the ascending range, as if scanned
/// sequentially. The parallel version partitions the range but reports the
/// match with the smallest index and prunes work to its right.
#[cfg(feature = "parallel")]
pub(crate) fn find_first_map<T, F>(range: std::ops::Range<u64>, f: F) -> Option<T>
where
    T: Send,
    F: Fn(u64) -> Option<T> + Sync + Send,
{
    range.into_par_iter().filter_map(f).find_first(|_| true)
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn find_first_map<T, F>(range: std::ops::Range<u64>, f: F) -> Option<T>
where
    T: Send,
    F: Fn(u64) -> Option<T> + Sync + Send,
{
    range.into_iter().find_map(f)
}
