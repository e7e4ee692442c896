//! Pluggable evaluation of independent work items.
//!
//! Grid search, per-product base models and per-date kriging are embarrassingly
//! parallel. The core only describes *what* is independent; the std crate
//! supplies a thread pool. Results are always returned in index order so the
//! outcome never depends on the worker count.

use alloc::vec::Vec;

pub trait Executor: Sync {
    fn map<R, F>(&self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send;
}

/// Runs every item on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<R, F>(&self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        (0..n).map(f).collect()
    }
}
