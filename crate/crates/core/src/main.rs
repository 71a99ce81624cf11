use std::io;
use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GOBOT_LOG", "warn")).init();
    let stdin = io::stdin();
    gobot::cli::main_with(std::env::args_os(), &mut stdin.lock(), &mut io::stdout().lock())
}
