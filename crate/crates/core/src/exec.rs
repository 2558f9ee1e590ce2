//! Sequential / data-parallel execution switch.
//!
//! Every batch entry point in the crate takes an [`Execution`]. `Parallel`
//! uses rayon when the `parallel` feature is enabled and silently degrades to
//! sequential iteration otherwise, so results never depend on the choice.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// True when work will actually be spread across threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Order-preserving map over a slice.
pub fn map<T, U, F>(exec: Execution, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if exec.is_parallel() {
            return items.par_iter().map(f).collect();
        }
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Order-preserving fallible map; the first error in input order wins.
pub fn try_map<T, U, E, F>(exec: Execution, items: &[T], f: F) -> Result<Vec<U>, E>
where
    T: Sync,
    U: Send,
    E: Send,
    F: Fn(&T) -> Result<U, E> + Sync + Send,
{
    map(exec, items, f).into_iter().collect()
}

/// Map each item then fold the results with an associative `merge`.
pub fn map_reduce<T, U, F, M>(exec: Execution, items: &[T], identity: U, f: F, merge: M) -> U
where
    T: Sync,
    U: Send + Sync + Clone,
    F: Fn(&T) -> U + Sync + Send,
    M: Fn(U, U) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if exec.is_parallel() {
            return items
                .par_iter()
                .map(&f)
                .reduce(|| identity.clone(), &merge);
        }
    }
    let _ = exec;
    items.iter().map(f).fold(identity, merge)
}
