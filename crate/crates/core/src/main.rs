use std::process::ExitCode;

use clap::Parser;
use wasscc::cli::{configure_threads, run, Cli, RunConfig};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| run(&RunConfig::from(cli.command)));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("wasscc: {}", f.message());
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
