//! Worker-count control for rayon-backed paths.

/// Runs `f` on a pool of `workers` threads, or on the global pool when
/// `workers == 0`.
pub fn install<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> T {
    if workers == 0 {
        return f();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}
