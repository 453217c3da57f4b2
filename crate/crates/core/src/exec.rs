//! Execution policy for the data-parallel parts of the crate.
//!
//! With the `parallel` feature (default) independent runs, per-step error
//! evaluations and dense matrix products use rayon. Without it,
//! [`Execution::Parallel`] silently degrades to sequential execution.

use faer::Par;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

impl Execution {
    /// Parallelism handed to faer kernels.
    pub fn faer_par(self) -> Par {
        match self {
            Execution::Sequential => Par::Seq,
            #[cfg(feature = "parallel")]
            Execution::Parallel => Par::rayon(0),
            #[cfg(not(feature = "parallel"))]
            Execution::Parallel => Par::Seq,
        }
    }

    /// Applies `f` to every element, in parallel when enabled.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                items.par_iter().map(f).collect()
            }
            _ => items.iter().map(f).collect(),
        }
    }

    /// Mutating counterpart of [`Execution::map`].
    pub fn map_mut<T, R, F>(self, items: &mut [T], f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(&mut T) -> R + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                items.par_iter_mut().map(f).collect()
            }
            _ => items.iter_mut().map(f).collect(),
        }
    }
}
