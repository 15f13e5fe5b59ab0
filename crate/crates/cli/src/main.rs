use std::process::ExitCode;

use clap::Parser;
use patchclust::{execute, Cli};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // Some parser messages span several lines; keep the report on one.
            let message: Vec<String> = e.to_string().lines().map(|l| l.trim().to_owned()).filter(|l| !l.is_empty()).collect();
            eprintln!("error: {}: {}", e.category(), message.join(" "));
            ExitCode::FAILURE
        }
    }
}
