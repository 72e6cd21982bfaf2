use std::process::ExitCode;

fn main() -> ExitCode {
    fastpe::experiment::main_with_args(std::env::args_os())
}
