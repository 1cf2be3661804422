//! Deterministic parallel execution helpers.
//!
//! Work is split into fixed-size chunks; each chunk is reduced sequentially
//! and the chunk partials are folded in index order. The result is therefore
//! bit-identical whether chunks run on rayon (`parallel` feature, default) or
//! on the current thread, and independent of the thread count.

/// Chunk length used by all reductions. Fixed so that the summation order
/// never depends on the executor.
pub const CHUNK: usize = 4096;

fn chunk_ranges(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n.div_ceil(CHUNK)).map(move |c| (c * CHUNK, ((c + 1) * CHUNK).min(n)))
}

/// Sum `term(i)` for `i in 0..n` with chunked, order-stable reduction.
#[cfg(feature = "parallel")]
pub fn chunked_sum<F>(n: usize, term: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    use rayon::prelude::*;
    let partials: Vec<f64> = chunk_ranges(n)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(lo, hi)| (lo..hi).map(&term).sum())
        .collect();
    partials.iter().sum()
}

#[cfg(not(feature = "parallel"))]
pub fn chunked_sum<F>(n: usize, term: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    chunked_sum_seq(n, term)
}

/// Sequential reference path for [`chunked_sum`]; same chunking, same result.
pub fn chunked_sum_seq<F>(n: usize, term: F) -> f64
where
    F: Fn(usize) -> f64,
{
    let partials: Vec<f64> = chunk_ranges(n)
        .map(|(lo, hi)| (lo..hi).map(&term).sum())
        .collect();
    partials.iter().sum()
}

/// Sum a pair of accumulators in one pass (e.g. numerator and denominator).
#[cfg(feature = "parallel")]
pub fn chunked_sum2<F>(n: usize, term: F) -> (f64, f64)
where
    F: Fn(usize) -> (f64, f64) + Sync + Send,
{
    use rayon::prelude::*;
    let partials: Vec<(f64, f64)> = chunk_ranges(n)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(lo, hi)| {
            let mut a = 0.0;
            let mut b = 0.0;
            for i in lo..hi {
                let (x, y) = term(i);
                a += x;
                b += y;
            }
            (a, b)
        })
        .collect();
    partials
        .iter()
        .fold((0.0, 0.0), |(a, b), &(x, y)| (a + x, b + y))
}

#[cfg(not(feature = "parallel"))]
pub fn chunked_sum2<F>(n: usize, term: F) -> (f64, f64)
where
    F: Fn(usize) -> (f64, f64) + Sync + Send,
{
    chunked_sum2_seq(n, term)
}

/// Sequential reference path for [`chunked_sum2`].
pub fn chunked_sum2_seq<F>(n: usize, term: F) -> (f64, f64)
where
    F: Fn(usize) -> (f64, f64),
{
    let partials: Vec<(f64, f64)> = chunk_ranges(n)
        .map(|(lo, hi)| {
            let mut a = 0.0;
            let mut b = 0.0;
            for i in lo..hi {
                let (x, y) = term(i);
                a += x;
                b += y;
            }
            (a, b)
        })
        .collect();
    partials
        .iter()
        .fold((0.0, 0.0), |(a, b), &(x, y)| (a + x, b + y))
}

/// Evaluate `f(i)` for `i in 0..n` into a vector, preserving index order.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().with_min_len(CHUNK).map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}
