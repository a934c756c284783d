//! Execution policy for the data-parallel loops (case generation, batch
//! gradients, rolling evaluation).
//!
//! Every parallel map returns results in input order, and every reduction
//! downstream folds them by index, so the worker count never changes a
//! result bit. With the `parallel` feature disabled all policies run
//! sequentially.

/// How many workers a data-parallel map may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    /// `0` means "let rayon decide".
    Parallel {
        workers: usize,
    },
}

impl Default for Exec {
    fn default() -> Self {
        Exec::Parallel { workers: 0 }
    }
}

impl Exec {
    pub fn with_workers(workers: usize) -> Self {
        if workers == 1 {
            Exec::Sequential
        } else {
            Exec::Parallel { workers }
        }
    }

    pub fn workers(&self) -> usize {
        match *self {
            Exec::Sequential => 1,
            Exec::Parallel { workers } => workers,
        }
    }

    /// Maps `f` over `0..n`, returning results in index order.
    pub fn map_indexed<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match *self {
            Exec::Sequential => (0..n).map(f).collect(),
            Exec::Parallel { workers } => par_map_indexed(workers, n, f),
        }
    }

    /// Maps `f` over a slice, returning results in slice order.
    pub fn map<I, T, F>(&self, items: &[I], f: F) -> Vec<T>
    where
        I: Sync,
        T: Send,
        F: Fn(&I) -> T + Sync + Send,
    {
        self.map_indexed(items.len(), |i| f(&items[i]))
    }
}

#[cfg(feature = "parallel")]
fn par_map_indexed<T, F>(workers: usize, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    if workers == 0 {
        return (0..n).into_par_iter().map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(|| (0..n).into_par_iter().map(f).collect()),
        // Thread spawn failure: fall back rather than abort the run.
        Err(_) => (0..n).map(f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
fn par_map_indexed<T, F>(_workers: usize, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved_for_any_worker_count() {
        let seq = Exec::Sequential.map_indexed(1000, |i| i * i);
        for w in [0, 2, 8] {
            assert_eq!(Exec::with_workers(w).map_indexed(1000, |i| i * i), seq);
        }
    }

    #[test]
    fn one_worker_is_sequential() {
        assert_eq!(Exec::with_workers(1), Exec::Sequential);
        assert_eq!(Exec::Sequential.workers(), 1);
    }
}
