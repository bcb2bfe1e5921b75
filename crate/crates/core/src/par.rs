//! Data-parallel helpers with a sequential fallback.
//!
//! Every helper preserves input order in its output, and reductions are
//! performed sequentially over per-chunk partials with a fixed chunk size, so
//! results are bit-identical whichever [`Execution`] mode runs them.
//! Without the `parallel` feature, [`Execution::Parallel`] silently runs
//! sequentially.

use serde::{Deserialize, Serialize};

/// Chunk length used by [`sum_chunked`]. Fixed so that the floating-point
/// summation order never depends on the thread count.
pub const REDUCTION_CHUNK: usize = 4096;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether work will actually be spread across threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Order-preserving map over a slice.
pub fn map_slice<T, U, F>(exec: Execution, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Order-preserving map over `0..len`.
pub fn map_range<U, F>(exec: Execution, len: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..len).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..len).map(f).collect()
}

/// Fallible order-preserving map; the first error in input order wins.
pub fn try_map_slice<T, U, E, F>(exec: Execution, items: &[T], f: F) -> Result<Vec<U>, E>
where
    T: Sync,
    U: Send,
    E: Send,
    F: Fn(&T) -> Result<U, E> + Sync + Send,
{
    map_slice(exec, items, f).into_iter().collect()
}

/// Deterministic sum of `f(i)` for `i in 0..len`.
///
/// Partials are accumulated per fixed-size chunk, then the partials are added
/// left to right.
pub fn sum_chunked<F>(exec: Execution, len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let chunks = len.div_ceil(REDUCTION_CHUNK);
    let partials = map_range(exec, chunks, |c| {
        let lo = c * REDUCTION_CHUNK;
        let hi = (lo + REDUCTION_CHUNK).min(len);
        let mut acc = 0.0;
        for i in lo..hi {
            acc += f(i);
        }
        acc
    });
    partials.into_iter().sum()
}

/// Runs `f` inside a pool with `threads` workers when `threads` is given.
pub fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    if let Some(t) = threads {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build() {
            return pool.install(f);
        }
    }
    let _ = threads;
    f()
}
