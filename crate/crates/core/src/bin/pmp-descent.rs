use std::process::ExitCode;

use clap::Parser;
use pmp_descent::cli::{self, config::config_from_args, CliArgs};
use pmp_descent::Error;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidConfig { .. } => 2,
        Error::Io(_) => 1,
        _ => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = CliArgs::parse();
    let config = match config_from_args(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };

    if config.sweep || config.meshes.len() > 1 {
        match cli::run_sweep(&config) {
            Ok(report) => {
                print!("{}", report.table);
                if report.failures() > 0 {
                    for row in report.rows.iter().filter(|r| r.result.is_err()) {
                        if let Err(e) = &row.result {
                            eprintln!("n={}: {e}", row.n);
                        }
                    }
                    return ExitCode::from(3);
                }
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(exit_code(&e))
            }
        }
    } else {
        match cli::run_single(&config) {
            Ok(summary) => {
                println!("{}", cli::output::TABLE_HEADER);
                println!("{}", cli::output::table_row(&summary));
                eprintln!("termination: {}", summary.termination);
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(exit_code(&e))
            }
        }
    }
}
