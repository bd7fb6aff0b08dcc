use std::process::ExitCode;

use clap::Parser;
use qrm_cli::{error_exit_code, run, Cli, EXIT_USAGE};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(&cli) {
        Ok(r) => {
            println!("{}", r.summary);
            ExitCode::from(r.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {:#}", e);
            ExitCode::from(error_exit_code(&e) as u8)
        }
    }
}
