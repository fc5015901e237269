//! Data-parallel helpers.
//!
//! Every helper returns results in index order, so reductions performed by
//! the caller afterwards do not depend on scheduling or on the worker count.

/// Plain sequential versions, always compiled. Used as the fallback when the
/// `parallel` feature is disabled and as the baseline in benchmarks.
pub mod seq {
    pub fn map_indexed<T, F>(len: usize, f: F) -> Vec<T>
    where
        F: Fn(usize) -> T,
    {
        (0..len).map(f).collect()
    }

    pub fn map_slice<S, T, F>(items: &[S], f: F) -> Vec<T>
    where
        F: Fn(&S) -> T,
    {
        items.iter().map(f).collect()
    }
}

#[cfg(feature = "parallel")]
mod imp {
    use rayon::prelude::*;

    pub fn map_indexed<T, F>(len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..len).into_par_iter().map(f).collect()
    }

    pub fn map_slice<S, T, F>(items: &[S], f: F) -> Vec<T>
    where
        S: Sync,
        T: Send,
        F: Fn(&S) -> T + Sync + Send,
    {
        items.par_iter().map(f).collect()
    }

    pub fn with_workers<R, F>(workers: usize, f: F) -> R
    where
        R: Send,
        F: FnOnce() -> R + Send,
    {
        if workers == 0 {
            return f();
        }
        match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
            Ok(pool) => pool.install(f),
            Err(e) => {
                log::warn!("could not build a {workers}-thread pool ({e}); using the global pool");
                f()
            }
        }
    }

    pub fn current_workers() -> usize {
        rayon::current_num_threads()
    }
}

#[cfg(not(feature = "parallel"))]
mod imp {
    pub fn map_indexed<T, F>(len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        super::seq::map_indexed(len, f)
    }

    pub fn map_slice<S, T, F>(items: &[S], f: F) -> Vec<T>
    where
        S: Sync,
        T: Send,
        F: Fn(&S) -> T + Sync + Send,
    {
        super::seq::map_slice(items, f)
    }

    pub fn with_workers<R, F>(_workers: usize, f: F) -> R
    where
        R: Send,
        F: FnOnce() -> R + Send,
    {
        f()
    }

    pub fn current_workers() -> usize {
        1
    }
}

/// Maps `f` over `0..len`, in parallel when available. Output is in index order.
pub use imp::map_indexed;
/// Maps `f` over a slice, in parallel when available. Output is in slice order.
pub use imp::map_slice;
/// Runs `f` inside a pool of `workers` threads (`0` keeps the current pool).
pub use imp::with_workers;
/// Number of worker threads visible to [`map_indexed`].
pub use imp::current_workers;
