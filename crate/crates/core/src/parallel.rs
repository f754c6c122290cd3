//! Replica-parallel execution with a deterministic result order.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Environment variable that caps the worker count.
pub const THREADS_ENV: &str = "SPDELAB_THREADS";

/// Thread cap from [`THREADS_ENV`], if set to a positive integer.
pub fn thread_cap_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&n: &usize| n > 0)
}

/// Run `f(r)` for `r in 0..replicas`, collecting results in replica order.
///
/// Every replica derives its own randomness from its index, so the output
/// does not depend on `threads`.
pub fn run_replicas<T, F>(replicas: u32, threads: Option<usize>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u32) -> Result<T> + Sync + Send,
{
    let job = || (0..replicas).into_par_iter().map(&f).collect::<Result<Vec<T>>>();
    match threads {
        None => job(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(job),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_independent_of_threads() {
        let f = |r: u32| Ok(f64::from(r).sqrt());
        let a = run_replicas(100, Some(1), f).unwrap();
        let b = run_replicas(100, Some(4), f).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[9], 3.0);
    }

    #[test]
    fn first_error_is_reported() {
        let out = run_replicas(10, Some(2), |r| {
            if r == 3 {
                Err(Error::Domain("bad".into()))
            } else {
                Ok(r)
            }
        });
        assert!(out.is_err());
    }
}
