use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(sea_cli::execute(std::env::args_os()))
}
