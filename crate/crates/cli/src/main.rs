use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = anchorkg_cli::args::Cli::parse();
    match anchorkg_cli::run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.one_line());
            ExitCode::FAILURE
        }
    }
}
