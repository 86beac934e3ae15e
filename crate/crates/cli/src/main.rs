use std::process::ExitCode;

use clap::Parser;
use labelcal_cli::Cli;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match labelcal_cli::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // messages already carry their causes
            eprintln!("labelcal: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
