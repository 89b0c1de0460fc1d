//! Worker-pool helper shared by the parallel pipeline stages.

/// Run `f` inside a rayon pool with `workers` threads (0 = rayon default).
///
/// Callers only use order-preserving parallel iterators, so the result of `f`
/// must not depend on the pool size.
pub fn install<T, F>(workers: usize, f: F) -> T
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(f),
        Err(err) => {
            log::warn!("could not build a {workers}-thread pool ({err}); using the global pool");
            f()
        }
    }
}
