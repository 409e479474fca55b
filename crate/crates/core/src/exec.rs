//! Index-parallel maps with a sequential fallback.
//!
//! Results are always collected in index order, so the choice of backend never
//! changes the output.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Execution {
    /// rayon when the `parallel` feature is enabled, sequential otherwise
    #[default]
    Parallel,
    Sequential,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// `(0..n).map(f)` on the selected backend.
pub fn map_indices<T, F>(n: usize, execution: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if execution.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = execution;
    (0..n).map(f).collect()
}

/// `items.iter().map(f)` on the selected backend.
pub fn map_slice<S, T, F>(items: &[S], execution: Execution, f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    map_indices(items.len(), execution, |i| f(&items[i]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backends_agree() {
        let f = |i: usize| (i as f64).sqrt().sin();
        let a = map_indices(1000, Execution::Parallel, f);
        let b = map_indices(1000, Execution::Sequential, f);
        assert_eq!(a, b);
    }
}
