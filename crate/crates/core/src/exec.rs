//! Parallel/sequential execution helper.
//!
//! With the `parallel` feature the closures fan out over the rayon pool;
//! without it everything runs sequentially. Results are collected in index
//! order either way, so callers observe identical output.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `0..n`, optionally in parallel.
///
/// `parallel` is honored only when the `parallel` feature is compiled in.
pub fn map_indexed<U, F>(n: usize, parallel: bool, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if parallel {
            return (0..n).into_par_iter().map(f).collect();
        }
    }
    let _ = parallel;
    (0..n).map(f).collect()
}
