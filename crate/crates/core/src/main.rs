use std::panic;
use std::process::ExitCode;

fn main() -> ExitCode {
    let code = panic::catch_unwind(|| rulxai::cli::run(std::env::args_os())).unwrap_or(rulxai::cli::EXIT_COMPUTE);
    ExitCode::from(code as u8)
}
