use std::process::ExitCode;

fn main() -> ExitCode {
    hybridreg::cli::main_with_args(std::env::args_os())
}
