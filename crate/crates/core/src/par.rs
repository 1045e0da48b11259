//! Switch between rayon and sequential execution. All callers produce
//! order-stable output, so results are identical with the `parallel` feature
//! on or off.

/// Applies `f` to each `chunk_len`-sized chunk of `data`.
pub(crate) fn for_each_chunk_mut<T, F>(data: &mut [T], chunk_len: usize, f: F)
where
    T: Send,
    F: Fn(&mut [T]) + Send + Sync,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        data.par_chunks_mut(chunk_len).for_each(f);
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.chunks_mut(chunk_len).for_each(|chunk| f(chunk));
    }
}

/// Maps `f` over `items`, preserving input order in the output. With the
/// `parallel` feature and `limit > 1`, work is spread over a dedicated pool
/// of `limit` threads; otherwise the map runs sequentially.
pub(crate) fn map_limit<T, U, F>(items: &[T], limit: usize, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Send + Sync,
{
    #[cfg(feature = "parallel")]
    if limit > 1 {
        use rayon::prelude::*;
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(limit).build() {
            return pool.install(|| items.par_iter().map(&f).collect());
        }
    }
    let _ = limit;
    items.iter().map(f).collect()
}
