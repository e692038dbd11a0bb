use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(roughstruct::cli::run(std::env::args_os()))
}
