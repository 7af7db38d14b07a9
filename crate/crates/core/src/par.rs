//! Order-preserving map over state indices, parallel when the `parallel`
//! feature is enabled and the caller asks for it.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Evaluates `f(0), ..., f(n - 1)` and returns the results in index order
/// regardless of scheduling.
pub fn map_indexed<T, F>(n: usize, parallel: bool, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel {
        return (0..n).into_par_iter().map(f).collect();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = parallel;
    (0..n).map(f).collect()
}

/// Whether this build can run state loops in parallel.
pub const fn parallel_available() -> bool {
    cfg!(feature = "parallel")
}
