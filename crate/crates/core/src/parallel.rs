//! Data-parallel batch execution.
//!
//! Every item of a batch gets its own random stream derived from the batch
//! seed and the item's index, so output is identical whichever executor runs
//! it and however many threads it uses.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// How a batch is run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Uses rayon when the `parallel` feature is enabled, otherwise runs
    /// sequentially.
    #[default]
    Parallel,
}

/// Random stream for item `index` of a batch seeded with `base`.
pub fn item_rng(base: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(index);
    rng
}

/// Scalar seed for item `index`, for APIs that take a `u64` seed.
pub fn item_seed(base: u64, index: u64) -> u64 {
    item_rng(base, index).next_u64()
}

/// `(0..n).map(f)` in index order, possibly in parallel.
pub fn map_indexed<T, F>(n: usize, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        Execution::Sequential => (0..n).map(f).collect(),
        Execution::Parallel => parallel_map(n, f),
    }
}

#[cfg(feature = "parallel")]
fn parallel_map<T: Send, F: Fn(usize) -> T + Sync + Send>(n: usize, f: F) -> Vec<T> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<T: Send, F: Fn(usize) -> T + Sync + Send>(n: usize, f: F) -> Vec<T> {
    (0..n).map(f).collect()
}
