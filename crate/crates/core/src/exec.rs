//! Indexed data-parallel mapping with a deterministic output order.
//!
//! Replication loops, bootstrap rounds, and per-observation diagnostics are
//! all "map an independent function over `0..n`" workloads. [`map_indexed`]
//! runs them on the rayon thread pool when the `parallel` feature is enabled
//! (the default) and falls back to a plain sequential loop otherwise. The
//! output is always ordered by index, so downstream reductions are
//! bit-identical regardless of thread count.
//!
//! [`force_sequential`] flips a process-wide switch to the sequential path at
//! runtime; it exists so benchmarks (and debugging sessions) can compare the
//! two paths inside one binary.

use std::sync::atomic::{AtomicBool, Ordering};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

static SEQUENTIAL_OVERRIDE: AtomicBool = AtomicBool::new(false);

/// Force all subsequent [`map_indexed`] calls onto the sequential path
/// (process-wide). Passing `false` restores the default behaviour.
pub fn force_sequential(on: bool) {
    SEQUENTIAL_OVERRIDE.store(on, Ordering::SeqCst);
}

/// True when [`map_indexed`] will actually fan out to worker threads.
pub fn parallel_enabled() -> bool {
    cfg!(feature = "parallel") && !SEQUENTIAL_OVERRIDE.load(Ordering::SeqCst)
}

/// Map `f` over `0..n`, returning results in index order.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if parallel_enabled() {
            return (0..n).into_par_iter().map(f).collect();
        }
    }
    map_indexed_seq(n, f)
}

/// Sequential version of [`map_indexed`]; always single-threaded.
pub fn map_indexed_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}
