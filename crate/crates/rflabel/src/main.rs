use std::process::ExitCode;

use clap::Parser;
use rflabel::cli::{run, Cli};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("RFLABEL_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rflabel: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
