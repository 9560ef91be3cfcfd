use std::process::ExitCode;

use clap::Parser;
use plab_cli::{run, Cli};

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(files) => {
            for f in files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("plab: {}", e.to_string().replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
