use std::process::ExitCode;

use clap::Parser;
use stefan_cli::{resolve, run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = resolve(cli.command, &cli.common, std::env::vars(), |p| {
        std::fs::read_to_string(p)
    })
    .and_then(|r| run(&r));
    match result {
        Ok(outcome) => {
            let verdict = match outcome.passed {
                Some(true) => " (check passed)",
                Some(false) => " (check FAILED)",
                None => "",
            };
            println!(
                "wrote {} files to {}{verdict}",
                outcome.outputs.len(),
                outcome.out.display()
            );
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("stefan: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
