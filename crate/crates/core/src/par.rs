//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature the chunked loops run on the rayon pool;
//! without it they run in order on the calling thread. Reductions always
//! use the same fixed chunking and the same pairwise combination tree, so
//! results are bit-identical between the two builds and independent of the
//! worker count.

use num_complex::Complex64;
use std::ops::Range;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Values that can be summed by [`reduce_chunks`].
pub trait Accumulate: Copy + Send + Sync {
    fn zero() -> Self;
    fn combine(self, other: Self) -> Self;
}

impl Accumulate for f64 {
    fn zero() -> Self {
        0.0
    }
    fn combine(self, other: Self) -> Self {
        self + other
    }
}

impl Accumulate for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn combine(self, other: Self) -> Self {
        self + other
    }
}

impl<T: Accumulate, const N: usize> Accumulate for [T; N] {
    fn zero() -> Self {
        [T::zero(); N]
    }
    fn combine(self, other: Self) -> Self {
        let mut out = self;
        for (o, x) in out.iter_mut().zip(other) {
            *o = o.combine(x);
        }
        out
    }
}

/// Pairwise (cascade) sum in a fixed tree order.
pub fn pairwise<T: Accumulate>(items: &[T]) -> T {
    match items.len() {
        0 => T::zero(),
        1 => items[0],
        n => {
            let (lo, hi) = items.split_at(n / 2);
            pairwise(lo).combine(pairwise(hi))
        }
    }
}

fn chunk_ranges(n: usize, chunk: usize) -> Vec<Range<usize>> {
    let chunk = chunk.max(1);
    (0..n.div_ceil(chunk))
        .map(|c| c * chunk..((c + 1) * chunk).min(n))
        .collect()
}

/// Evaluate `f` on consecutive index ranges of length `chunk` covering
/// `0..n`, then combine the partial results pairwise.
pub fn reduce_chunks<T, F>(n: usize, chunk: usize, f: F) -> T
where
    T: Accumulate,
    F: Fn(Range<usize>) -> T + Sync + Send,
{
    let ranges = chunk_ranges(n, chunk);
    #[cfg(feature = "parallel")]
    let partials: Vec<T> = ranges.into_par_iter().map(&f).collect();
    #[cfg(not(feature = "parallel"))]
    let partials: Vec<T> = ranges.into_iter().map(&f).collect();
    pairwise(&partials)
}

/// Order-preserving map over `0..n`.
pub fn map_indices<T, F>(n: usize, f: F) -> Vec<T>
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

/// Order-preserving map over a slice.
pub fn map_slice<S, T, F>(items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Run `f(offset, a_chunk, b_chunk)` over matching chunks of two equally
/// long slices.
pub fn for_each_chunk_pair<A, B, F>(a: &mut [A], b: &mut [B], chunk: usize, f: F)
where
    A: Send,
    B: Send,
    F: Fn(usize, &mut [A], &mut [B]) + Sync + Send,
{
    assert_eq!(a.len(), b.len());
    let chunk = chunk.max(1);
    #[cfg(feature = "parallel")]
    {
        a.par_chunks_mut(chunk)
            .zip(b.par_chunks_mut(chunk))
            .enumerate()
            .for_each(|(c, (ca, cb))| f(c * chunk, ca, cb));
    }
    #[cfg(not(feature = "parallel"))]
    {
        a.chunks_mut(chunk)
            .zip(b.chunks_mut(chunk))
            .enumerate()
            .for_each(|(c, (ca, cb))| f(c * chunk, ca, cb));
    }
}

/// Run `f(offset, chunk)` over chunks of a slice.
pub fn for_each_chunk<A, F>(a: &mut [A], chunk: usize, f: F)
where
    A: Send,
    F: Fn(usize, &mut [A]) + Sync + Send,
{
    let chunk = chunk.max(1);
    #[cfg(feature = "parallel")]
    {
        a.par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(c, ca)| f(c * chunk, ca));
    }
    #[cfg(not(feature = "parallel"))]
    {
        a.chunks_mut(chunk)
            .enumerate()
            .for_each(|(c, ca)| f(c * chunk, ca));
    }
}

/// Run `f(offset, chunk)` over mutable chunks of a slice and combine the
/// returned partials pairwise in chunk order.
pub fn reduce_chunks_mut<A, T, F>(a: &mut [A], chunk: usize, f: F) -> T
where
    A: Send,
    T: Accumulate,
    F: Fn(usize, &mut [A]) -> T + Sync + Send,
{
    let chunk = chunk.max(1);
    #[cfg(feature = "parallel")]
    let partials: Vec<T> = a
        .par_chunks_mut(chunk)
        .enumerate()
        .map(|(c, ca)| f(c * chunk, ca))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let partials: Vec<T> = a
        .chunks_mut(chunk)
        .enumerate()
        .map(|(c, ca)| f(c * chunk, ca))
        .collect();
    pairwise(&partials)
}

/// Size the global worker pool. Only the first call has an effect; with
/// the sequential build this is a no-op.
pub fn set_workers(n: usize) {
    #[cfg(feature = "parallel")]
    {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = n;
    }
}

pub fn workers() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}
