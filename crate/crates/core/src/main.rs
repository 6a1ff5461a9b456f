use std::process::ExitCode;

fn main() -> ExitCode {
    // exit 2 marks an internal invariant failure, per the CLI contract
    match std::panic::catch_unwind(|| gemm_perf_oracle::cli::run(std::env::args())) {
        Ok(code) => ExitCode::from(code.clamp(0, 255) as u8),
        Err(_) => ExitCode::from(2),
    }
}
