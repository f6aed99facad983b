use std::process::ExitCode;

use clap::Parser;
use obcov::cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(lines) => {
            for line in lines {
                println!("{line}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("obcov: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
