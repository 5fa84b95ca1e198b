//! Ordered fan-out over grid points, rayon-backed when the `parallel` feature is on.

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

/// Maps `f` over `items`, preserving order. On failure the error of the
/// lowest failing index is returned, so results do not depend on scheduling.
pub fn try_map<T, U, F>(items: &[T], exec: Execution, f: F) -> Result<Vec<U>>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> Result<U> + Sync + Send,
{
    let results: Vec<Result<U>> = match exec {
        Execution::Sequential => items.iter().map(&f).collect(),
        Execution::Parallel => parallel_map(items, &f),
    };
    results.into_iter().collect()
}

#[cfg(feature = "parallel")]
fn parallel_map<T, U, F>(items: &[T], f: &F) -> Vec<Result<U>>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> Result<U> + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<T, U, F>(items: &[T], f: &F) -> Vec<Result<U>>
where
    F: Fn(&T) -> Result<U>,
{
    items.iter().map(f).collect()
}
