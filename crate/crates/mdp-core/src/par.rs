//! Data-parallel helpers with a sequential fallback.
//!
//! Every parallel loop in the crate funnels through [`map_indexed`], which
//! returns results ordered by index. Reductions over those results happen
//! sequentially in index order, so outputs are bit-identical whether the
//! `parallel` feature is enabled or not, and regardless of thread scheduling.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[cfg(feature = "parallel")]
pub(crate) fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Cap the global worker pool at `threads`. Returns `false` when the pool was
/// already initialized or the crate was built without the `parallel` feature.
#[cfg(feature = "parallel")]
pub fn configure_threads(threads: usize) -> bool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .is_ok()
}

#[cfg(not(feature = "parallel"))]
pub fn configure_threads(_threads: usize) -> bool {
    false
}
