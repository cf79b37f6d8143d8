//! Data-parallel fan-out helper.
//!
//! Every expensive loop in the library is a map over independent work items
//! (one Lippmann-Schwinger solve per direction, one filter block per
//! measurement source). Those loops go through [`try_map`], which runs on
//! rayon when the `parallel` feature is enabled (the default) and falls
//! back to a plain sequential loop otherwise. Results are collected in
//! index order either way, so outputs are bitwise identical across both
//! code paths and any thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `0..n`, failing fast on the first error.
#[cfg(feature = "parallel")]
pub fn try_map<T, E, F>(n: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// Sequential fallback with the same contract as the rayon version.
#[cfg(not(feature = "parallel"))]
pub fn try_map<T, E, F>(n: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    (0..n).map(f).collect()
}
