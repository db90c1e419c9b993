//! Worker pool sized by the `CML_THREADS` environment variable.

use std::sync::OnceLock;

use rayon::{ThreadPool, ThreadPoolBuilder};

fn pool() -> Option<&'static ThreadPool> {
    static POOL: OnceLock<Option<ThreadPool>> = OnceLock::new();
    POOL.get_or_init(|| {
        let cap = std::env::var("CML_THREADS")
            .ok()?
            .trim()
            .parse::<usize>()
            .ok()?;
        ThreadPoolBuilder::new()
            .num_threads(cap.max(1))
            .build()
            .ok()
    })
    .as_ref()
}

/// Runs `f` on the capped pool when `CML_THREADS` is set, else on rayon's global pool.
pub fn install<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    match pool() {
        Some(p) => p.install(f),
        None => f(),
    }
}
