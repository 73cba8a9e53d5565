//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) work is spread over the rayon pool;
//! without it every helper runs in order on the calling thread. Results are
//! always returned in input order, so callers stay deterministic either way.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parallelism {
    Sequential,
    Threads,
}

impl Default for Parallelism {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Parallelism::Threads
        } else {
            Parallelism::Sequential
        }
    }
}

impl Parallelism {
    pub fn from_workers(workers: usize) -> Self {
        if workers <= 1 {
            Parallelism::Sequential
        } else {
            Parallelism::default()
        }
    }
}

pub fn map_indexed<T, F>(n: usize, mode: Parallelism, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode == Parallelism::Threads {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = mode;
    (0..n).map(f).collect()
}

pub fn map_slice<I, T, F>(items: &[I], mode: Parallelism, f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode == Parallelism::Threads {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = mode;
    items.iter().map(f).collect()
}

/// Runs `f` inside a pool of `workers` threads (ignored without the
/// `parallel` feature or when `workers == 0`).
pub fn with_workers<R, F>(workers: usize, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    #[cfg(feature = "parallel")]
    if workers > 0 {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
            return pool.install(f);
        }
    }
    let _ = workers;
    f()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_preserved_in_both_modes() {
        let seq = map_indexed(100, Parallelism::Sequential, |i| i * i);
        let par = map_indexed(100, Parallelism::Threads, |i| i * i);
        assert_eq!(seq, par);
        let words = ["a", "bb", "ccc"];
        assert_eq!(map_slice(&words, Parallelism::Threads, |w| w.len()), vec![1, 2, 3]);
    }
}
