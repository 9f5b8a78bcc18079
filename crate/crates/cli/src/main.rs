use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(pnc_cli::run(std::env::args_os()))
}
