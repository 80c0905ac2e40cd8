//! Data-parallel helpers. With the `parallel` feature the work is spread
//! over the rayon pool; without it, or with [`Execution::Sequential`], it
//! runs on the calling thread. Results are always returned in index order,
//! so every reduction downstream is deterministic.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// `true` when work will actually run on the rayon pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// `(0..n).map(f)` collected in index order.
    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// `(0..n).all(f)` over a `u64` range (enumerations exceed `usize` on
    /// no platform we target, but masks are `u64` throughout).
    pub fn all<F>(self, n: u64, f: F) -> bool
    where
        F: Fn(u64) -> bool + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return (0..n).into_par_iter().all(f);
        }
        (0..n).all(f)
    }

    /// `(0..n).filter_map(f)` collected in index order.
    pub fn filter_map<T, F>(self, n: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> Option<T> + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return (0..n).into_par_iter().filter_map(f).collect();
        }
        (0..n).filter_map(f).collect()
    }
}

/// Sizes the global rayon pool. Only the first call has an effect; returns
/// `false` when the pool was already initialized or the feature is off.
pub fn init_thread_pool(threads: usize) -> bool {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .is_ok()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_modes_agree() {
        let f = |i: usize| i * i;
        assert_eq!(Execution::Sequential.map(100, f), Execution::Parallel.map(100, f));
        let g = |i: u64| (i % 7 == 3).then_some(i);
        assert_eq!(
            Execution::Sequential.filter_map(500, g),
            Execution::Parallel.filter_map(500, g)
        );
        assert!(Execution::Parallel.all(1000, |i| i < 1000));
        assert!(!Execution::Sequential.all(1000, |i| i < 999));
    }
}
