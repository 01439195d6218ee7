//! Data-parallel execution helpers.
//!
//! With the `parallel` feature the helpers dispatch to rayon; without it they
//! run the same closures on plain iterators. Per-item work never depends on
//! the partitioning, and reductions combine fixed-size chunks in index order,
//! so outputs are bitwise identical across thread counts and builds.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Items per chunk for ordered reductions. Fixed so results do not depend on
/// the thread count.
pub const REDUCE_CHUNK: usize = 4096;

/// Applies `f(state, index, input_row, output_row)` to every row of a
/// row-major pixel buffer, returning the output buffer and per-row status.
pub fn map_rows<S, R, I, F>(
    input: &[f64],
    in_width: usize,
    out_width: usize,
    init: I,
    f: F,
) -> (Vec<f64>, Vec<R>)
where
    R: Send + Default + Clone,
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, usize, &[f64], &mut [f64]) -> R + Sync + Send,
{
    assert!(in_width > 0 && out_width > 0);
    let rows = input.len() / in_width;
    let mut out = vec![0.0; rows * out_width];
    let mut status = vec![R::default(); rows];
    #[cfg(feature = "parallel")]
    {
        out.par_chunks_mut(out_width)
            .zip(input.par_chunks(in_width))
            .zip(status.par_iter_mut())
            .enumerate()
            .for_each_init(&init, |state, (i, ((o, x), st))| *st = f(state, i, x, o));
    }
    #[cfg(not(feature = "parallel"))]
    {
        let mut state = init();
        for (i, ((o, x), st)) in out
            .chunks_mut(out_width)
            .zip(input.chunks(in_width))
            .zip(status.iter_mut())
            .enumerate()
        {
            *st = f(&mut state, i, x, o);
        }
    }
    (out, status)
}

/// Applies `f(index, row)` to every row of a mutable row-major buffer.
pub fn for_each_row_mut<F>(data: &mut [f64], width: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    data.par_chunks_mut(width).enumerate().for_each(|(i, row)| f(i, row));
    #[cfg(not(feature = "parallel"))]
    data.chunks_mut(width).enumerate().for_each(|(i, row)| f(i, row));
}

/// Maps `f` over `0..n` preserving order.
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

/// Ordered chunked reduction over `0..n`: `map` folds one chunk
/// `[start, end)` into a partial, partials are combined left to right.
pub fn reduce_chunks<T, M, C>(n: usize, identity: T, map: M, combine: C) -> T
where
    T: Send,
    M: Fn(usize, usize) -> T + Sync + Send,
    C: Fn(T, T) -> T,
{
    let chunks = n.div_ceil(REDUCE_CHUNK);
    let partials = map_indices(chunks, |c| {
        let start = c * REDUCE_CHUNK;
        map(start, (start + REDUCE_CHUNK).min(n))
    });
    partials.into_iter().fold(identity, combine)
}
