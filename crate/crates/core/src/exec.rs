//! Sequential or data-parallel execution of the aggregation loops.
//!
//! With the `parallel` feature the [`Exec::Parallel`] mode runs on rayon;
//! without it every mode runs sequentially. Both modes produce identical
//! results because every fold used here merges commutatively.

/// Execution strategy for query and scene loops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Exec {
    Sequential,
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

impl Exec {
    /// Whether this mode will actually run in parallel in this build.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }
}

// Below this many items the rayon split overhead dominates.
#[cfg(feature = "parallel")]
const PAR_MIN_LEN: usize = 4096;

pub(crate) fn fold_reduce<T, A, I, F, M>(items: &[T], exec: Exec, identity: I, fold: F, merge: M) -> A
where
    T: Sync,
    A: Send,
    I: Fn() -> A + Sync + Send,
    F: Fn(A, &T) -> A + Sync + Send,
    M: Fn(A, A) -> A + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() && items.len() >= PAR_MIN_LEN {
        use rayon::prelude::*;
        return items
            .par_iter()
            .with_min_len(PAR_MIN_LEN / 4)
            .fold(&identity, &fold)
            .reduce(&identity, &merge);
    }
    let _ = (&exec, &merge);
    items.iter().fold(identity(), fold)
}

/// Order-preserving `filter_map` + collect.
pub(crate) fn filter_map<'a, T, U, F>(items: &'a [T], exec: Exec, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&'a T) -> Option<U> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() && items.len() >= PAR_MIN_LEN {
        use rayon::prelude::*;
        return items.par_iter().filter_map(&f).collect();
    }
    let _ = exec;
    items.iter().filter_map(f).collect()
}
