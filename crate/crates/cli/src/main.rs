use clap::Parser;
use std::process::ExitCode;

fn main() -> ExitCode {
    let cli = simready_cli::Cli::parse();
    simready_cli::init_logging(cli.verbose);
    match simready_cli::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
