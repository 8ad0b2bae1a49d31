use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(pcs_core::cli::run(std::env::args_os()))
}
