use std::panic;

use setprio::cli::run_cli;
use setprio::ExitCode;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let code = panic::catch_unwind(|| run_cli(std::env::args_os())).unwrap_or_else(|_| {
        eprintln!("error: internal failure");
        ExitCode::Internal
    });
    std::process::exit(code.code());
}
