//! Node-loop helpers with a rayon backend and a sequential fallback.
//!
//! Every helper computes each output slot from its index alone, and the only
//! reductions are `max`/`min`, so results do not depend on how the index
//! range is partitioned across threads.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Nodes handed to one task at a time; also the granularity of scratch reuse.
const CHUNK: usize = 1024;

/// Fills `out[i] = f(scratch, i)`, creating one scratch value per chunk.
pub fn fill_with<S, I, F>(out: &mut [f64], init: I, f: F)
where
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, usize) -> f64 + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        out.par_chunks_mut(CHUNK)
            .enumerate()
            .for_each(|(c, chunk)| {
                let mut s = init();
                let base = c * CHUNK;
                for (k, v) in chunk.iter_mut().enumerate() {
                    *v = f(&mut s, base + k);
                }
            });
    }
    #[cfg(not(feature = "parallel"))]
    {
        let mut s = init();
        for (i, v) in out.iter_mut().enumerate() {
            *v = f(&mut s, i);
        }
    }
}

/// Fills the `i`-th block of `width` slots with `f(i, block)`.
pub fn fill_chunks<F>(out: &mut [f64], width: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        out.par_chunks_mut(width)
            .with_min_len(CHUNK)
            .enumerate()
            .for_each(|(i, block)| f(i, block));
    }
    #[cfg(not(feature = "parallel"))]
    {
        for (i, block) in out.chunks_mut(width).enumerate() {
            f(i, block);
        }
    }
}

/// Fills `out[i] = f(i)`.
pub fn fill<F>(out: &mut [f64], f: F)
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    fill_with(out, || (), |_, i| f(i));
}

/// Collects `f(i)` for `i` in `0..len`.
pub fn map<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..len).into_par_iter().with_min_len(CHUNK).map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..len).map(f).collect()
    }
}

/// Maximum of `f(i)` over `0..len` (`-inf` when empty). NaN propagates.
pub fn max<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let pick = |a: f64, b: f64| if a.is_nan() || b.is_nan() { f64::NAN } else { a.max(b) };
    #[cfg(feature = "parallel")]
    {
        (0..len)
            .into_par_iter()
            .with_min_len(CHUNK)
            .map(f)
            .reduce(|| f64::NEG_INFINITY, pick)
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..len).map(f).fold(f64::NEG_INFINITY, pick)
    }
}

/// Minimum of `f(i)` over `0..len` (`+inf` when empty).
pub fn min<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    -max(len, |i| -f(i))
}

/// Runs `f` with at most `threads` worker threads. Without the `parallel`
/// feature, or when `threads` is `None`, `f` runs on the current pool.
pub fn with_threads<R, F>(threads: Option<usize>, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    #[cfg(feature = "parallel")]
    {
        if let Some(t) = threads {
            if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build() {
                return pool.install(f);
            }
        }
        f()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        f()
    }
}

/// Thread cap read from `CMCF_THREADS`, if set to a positive integer.
pub fn threads_from_env() -> Option<usize> {
    std::env::var("CMCF_THREADS")
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&t| t > 0)
}
