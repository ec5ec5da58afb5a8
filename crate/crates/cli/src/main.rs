use std::process::ExitCode;

use clap::Parser;
use seqslam_cli::{execute, Cli};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SEQSLAM_LOG", "warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(message) => {
            println!("{message}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {}", e.single_line());
            ExitCode::FAILURE
        }
    }
}
