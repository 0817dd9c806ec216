use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(mpemba_cli::args::main_with(std::env::args_os(), &mut std::io::stdout()))
}
