//! Data-parallel map with a sequential fallback.

use serde::{Deserialize, Serialize};

/// How independent work units are executed.
///
/// `Rayon` uses the global rayon pool when the crate is built with the
/// `parallel` feature and degrades to sequential execution otherwise.
/// Results are always returned in input order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parallelism {
    Sequential,
    Rayon,
}

impl Default for Parallelism {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Parallelism::Rayon
        } else {
            Parallelism::Sequential
        }
    }
}

pub(crate) fn map<T, R, F>(mode: Parallelism, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match mode {
        #[cfg(feature = "parallel")]
        Parallelism::Rayon => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        _ => items.iter().map(f).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree_and_keep_order() {
        let items: Vec<u64> = (0..1000).collect();
        let seq = map(Parallelism::Sequential, &items, |x| x * x);
        let par = map(Parallelism::Rayon, &items, |x| x * x);
        assert_eq!(seq, par);
        assert_eq!(seq[31], 961);
    }
}
