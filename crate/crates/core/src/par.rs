//! Data-parallel helpers.
//!
//! With the `parallel` feature (default) these dispatch to rayon and honour
//! whatever thread pool is current; without it they run sequentially. Every
//! helper produces output in index order, so results never depend on the
//! number of worker threads.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Evaluates `f(i)` for `i in 0..n` and collects in index order.
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
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

/// Calls `f(chunk_index, chunk)` over consecutive `chunk_len`-sized chunks.
pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk_len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    assert!(chunk_len > 0, "chunk length must be positive");
    #[cfg(feature = "parallel")]
    {
        data.par_chunks_mut(chunk_len)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.chunks_mut(chunk_len)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
    }
}

/// Maps `0..n` and folds with an associative `combine`, starting from `identity()`.
pub fn map_reduce<T, M, I, C>(n: usize, identity: I, map: M, combine: C) -> T
where
    T: Send,
    M: Fn(usize) -> T + Sync + Send,
    I: Fn() -> T + Sync + Send,
    C: Fn(T, T) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(map).reduce(identity, combine)
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(map).fold(identity(), combine)
    }
}

/// True when the crate was built with rayon support.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_range_keeps_order() {
        let v = map_range(1000, |i| i * 2);
        assert!(v.iter().enumerate().all(|(i, &x)| x == 2 * i));
    }

    #[test]
    fn chunks_see_their_index() {
        let mut v = vec![0usize; 30];
        for_each_chunk_mut(&mut v, 7, |ci, c| c.iter_mut().for_each(|x| *x = ci));
        assert_eq!(v[0], 0);
        assert_eq!(v[7], 1);
        assert_eq!(v[29], 4);
    }

    #[test]
    fn reduce_sums() {
        let s = map_reduce(101, || 0u64, |i| i as u64, |a, b| a + b);
        assert_eq!(s, 5050);
    }
}
