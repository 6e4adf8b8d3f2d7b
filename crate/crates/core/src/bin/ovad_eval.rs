use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(ovad_eval::cli::run(std::env::args()) as u8)
}
