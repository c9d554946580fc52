//! Order-preserving map over independent work items.
//!
//! With the `parallel` feature and `jobs > 1` the items run on a dedicated
//! rayon pool of `jobs` threads; otherwise they run in order on the calling
//! thread. Output order always matches input order.

/// Apply `f` to every item, returning results in input order.
pub fn map_ordered<T, R, F>(jobs: usize, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if jobs > 1 && items.len() > 1 {
        use rayon::prelude::*;
        match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
            Ok(pool) => return pool.install(|| items.par_iter().map(&f).collect()),
            Err(err) => {
                tracing::warn!(error = %err, "thread pool unavailable, running sequentially")
            }
        }
    }
    #[cfg(not(feature = "parallel"))]
    if jobs > 1 {
        tracing::debug!(
            jobs,
            "built without the parallel feature, running sequentially"
        );
    }
    items.iter().map(f).collect()
}

/// Whether this build can run work concurrently.
pub const fn is_parallel_build() -> bool {
    cfg!(feature = "parallel")
}
