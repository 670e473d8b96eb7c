//! Data-parallel execution helpers.
//!
//! All bulk loops in this crate (Monte-Carlo replications, property sweeps,
//! grid evaluations) go through `map_indexed`, which runs on rayon when the
//! `parallel` feature is enabled and falls back to a plain sequential loop
//! otherwise. Results are collected in index order, so the output is
//! identical regardless of thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `0..n`, collecting results in index order.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Sequential variant, kept available for benchmarking against the
/// parallel path.
pub fn map_indexed_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}
