use std::process::ExitCode;

fn main() -> ExitCode {
    ltfade_cli::run(std::env::args_os())
}
