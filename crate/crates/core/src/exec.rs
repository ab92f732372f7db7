//! Data-parallel map over independent work items.
//!
//! With the `parallel` feature the map runs on the rayon pool; without it,
//! or with [`Mode::Sequential`], items are processed in order on the calling
//! thread. Results are identical in both modes.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Sequential,
    #[default]
    Parallel,
}

impl Mode {
    /// Whether this build can actually run in parallel.
    pub fn parallel_available() -> bool {
        cfg!(feature = "parallel")
    }
}

pub fn map_range<T, F>(mode: Mode, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode == Mode::Parallel {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = mode;
    (0..n).map(f).collect()
}

/// Sizes the global rayon pool. Returns false if it was already built or
/// the build has no parallel support.
pub fn init_threads(threads: usize) -> bool {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().is_ok()
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
    fn modes_agree() {
        let f = |i: usize| i * i + 1;
        assert_eq!(map_range(Mode::Sequential, 100, f), map_range(Mode::Parallel, 100, f));
    }
}
