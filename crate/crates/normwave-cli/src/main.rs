use std::process::ExitCode;

use clap::Parser;
use normwave_cli::error::{EXIT_CONFIG, EXIT_OK};
use normwave_cli::{run, Cli};

fn main() -> ExitCode {
    let arguments: Vec<String> = std::env::args().skip(1).collect();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK });
        }
    };
    match run(cli, arguments) {
        Ok(()) => ExitCode::from(EXIT_OK),
        Err(e) => {
            eprintln!("normwave: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
