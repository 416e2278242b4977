//! Thin switch between rayon and sequential iteration.
//!
//! Compiled with the `parallel` feature (the default) these helpers fan work
//! out over rayon's global pool; without it they degrade to plain iterators.
//! Callers must pass closures whose output is independent of execution order
//! so both modes produce identical results.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `items` through `op` and collects the results in input order.
#[cfg(feature = "parallel")]
pub fn map_collect<T, R, F>(items: &[T], op: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.par_iter().map(op).collect()
}

/// Maps `items` through `op` and collects the results in input order.
#[cfg(not(feature = "parallel"))]
pub fn map_collect<T, R, F>(items: &[T], op: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.iter().map(op).collect()
}

/// True when this build dispatches onto rayon.
pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
