use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(mua_cli::run(std::env::args_os()))
}
