//! Library surface of the experiment runner: config parsing, execution
//! wiring, report serialization, and the brute-force oracle suite.

pub mod config;
pub mod oracle;
pub mod report;
pub mod runner;

/// Honor `FLSIM_THREADS`: cap the rayon pool and the GEMM threading. Call
/// once at process start; does nothing when the variable is unset.
pub fn init_thread_caps() {
    if let Ok(raw) = std::env::var("FLSIM_THREADS") {
        if let Ok(n) = raw.trim().parse::<usize>() {
            if n >= 1 {
                // GEMM threading reads its own variable; only set it when the
                // user has not pinned it explicitly
                if std::env::var("MATMUL_NUM_THREADS").is_err() {
                    std::env::set_var("MATMUL_NUM_THREADS", n.to_string());
                }
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
        }
    }
}
