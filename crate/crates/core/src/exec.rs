//! Chunked execution with deterministic ordering.
//!
//! With the `parallel` feature and more than one worker, chunks run on the
//! ambient rayon pool; otherwise they run in order on the calling thread.
//! Results are always collected in chunk order, so any reduction done by
//! the caller over the returned vector is independent of the worker count.

use serde::{Deserialize, Serialize};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub const DEFAULT_CHUNK: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Parallelism {
    /// 1 runs everything on the calling thread.
    pub workers: usize,
    /// Branches per chunk; fixes the reduction tree.
    pub chunk_size: usize,
}

impl Default for Parallelism {
    fn default() -> Self {
        Self {
            workers: available_workers(),
            chunk_size: DEFAULT_CHUNK,
        }
    }
}

impl Parallelism {
    pub fn sequential() -> Self {
        Self {
            workers: 1,
            chunk_size: DEFAULT_CHUNK,
        }
    }

    pub fn with_workers(workers: usize) -> Self {
        Self {
            workers: workers.max(1),
            chunk_size: DEFAULT_CHUNK,
        }
    }

    pub fn is_parallel(&self) -> bool {
        cfg!(feature = "parallel") && self.workers > 1
    }

    /// Runs `f` inside a pool sized to `workers`.
    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        #[cfg(feature = "parallel")]
        if self.workers > 1 {
            if let Ok(pool) = rayon::ThreadPoolBuilder::new()
                .num_threads(self.workers)
                .build()
            {
                return pool.install(f);
            }
        }
        f()
    }

    /// Applies `f` to consecutive chunks of `items`, returning results in
    /// chunk order.
    pub fn map_chunks<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(usize, &[T]) -> R + Sync + Send,
    {
        let chunk = self.chunk_size.max(1);
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return items
                .par_chunks(chunk)
                .enumerate()
                .map(|(i, c)| f(i, c))
                .collect();
        }
        items.chunks(chunk).enumerate().map(|(i, c)| f(i, c)).collect()
    }

    /// Pairs chunks of `chunk_size` input records (`in_stride` scalars each)
    /// with disjoint output regions (`out_stride` scalars per input record)
    /// and applies `f` to each pair.
    pub fn zip_chunks_mut<F>(
        &self,
        input: &[f64],
        in_stride: usize,
        output: &mut [f64],
        out_stride: usize,
        f: F,
    ) where
        F: Fn(usize, &[f64], &mut [f64]) + Sync + Send,
    {
        let chunk = self.chunk_size.max(1);
        let in_len = (chunk * in_stride).max(1);
        let out_len = (chunk * out_stride).max(1);
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            input
                .par_chunks(in_len)
                .zip(output.par_chunks_mut(out_len))
                .enumerate()
                .for_each(|(i, (src, dst))| f(i * chunk, src, dst));
            return;
        }
        input
            .chunks(in_len)
            .zip(output.chunks_mut(out_len))
            .enumerate()
            .for_each(|(i, (src, dst))| f(i * chunk, src, dst));
    }

    /// Evaluates `f(i)` for `i in 0..n`, results in index order.
    pub fn map_indexed<R, F>(&self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }
}

pub fn available_workers() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}
