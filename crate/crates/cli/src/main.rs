mod args;
mod commands;
mod config;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};
use commands::CliError;

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .map_err(|e| CliError::Usage(format!("--jobs: {e}")))?;
    }
    let seed = cli.seed;
    match &cli.command {
        Command::Scan(a) => commands::scan(a),
        Command::Holes(a) => commands::holes(a, seed),
        Command::BuildDataset(a) => commands::build(a, seed),
        Command::Pack(a) => commands::pack(a, seed),
        Command::Eval(a) => commands::eval(a),
        Command::TrainToy(a) => commands::train_toy(a, seed),
        Command::Stats(a) => commands::stats_cmd(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = match config::inject(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, CliError::Usage(_)) && e.to_string().contains("provider") {
                eprintln!("providers: {}", commands::provider_names());
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
