//! Index-parallel maps with a sequential fallback.
//!
//! Results are always collected in index order, so parallel and sequential
//! runs produce identical output.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    Sequential,
    /// Uses rayon when the `parallel` feature is enabled, otherwise runs
    /// sequentially.
    #[default]
    Parallel,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Like [`Execution::map`], returning the first error by index.
    pub fn try_map<T, F>(self, n: usize, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize) -> Result<T> + Sync + Send,
    {
        self.map(n, f).into_iter().collect()
    }
}

/// Runs `f` with at most `threads` workers. `None` uses the global pool.
pub fn with_threads<R, F>(threads: Option<usize>, f: F) -> Result<R>
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    match threads {
        None => Ok(f()),
        Some(0) => Err(Error::InvalidParameter("thread count must be positive".into())),
        #[cfg(feature = "parallel")]
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
        #[cfg(not(feature = "parallel"))]
        Some(_) => Ok(f()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree_in_order() {
        let f = |i: usize| (i as f64).sqrt().sin();
        let a = Execution::Sequential.map(1000, f);
        let b = Execution::Parallel.map(1000, f);
        assert_eq!(a, b);
    }

    #[test]
    fn try_map_reports_first_error() {
        let r = Execution::Parallel.try_map(10, |i| {
            if i >= 3 {
                Err(Error::InvalidParameter(format!("{i}")))
            } else {
                Ok(i)
            }
        });
        assert!(matches!(r, Err(Error::InvalidParameter(s)) if s == "3"));
    }

    #[test]
    fn thread_cap() {
        assert_eq!(with_threads(Some(2), || Execution::Parallel.map(4, |i| i * 2)).unwrap(), vec![0, 2, 4, 6]);
        assert!(with_threads(Some(0), || ()).is_err());
    }
}
