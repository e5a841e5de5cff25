use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use oqho_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let output = match run(&cli) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code());
        }
    };
    let written = match &cli.global.out {
        Some(path) => std::fs::write(path, &output.text),
        None => std::io::stdout().write_all(output.text.as_bytes()),
    };
    if let Err(e) = written {
        eprintln!("error: cannot write output: {e}");
        return ExitCode::from(1);
    }
    if output.failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        for f in &output.failures {
            eprintln!("warning: {f}");
        }
        ExitCode::from(2)
    }
}
