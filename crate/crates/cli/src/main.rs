use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

use avr_cli::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match avr_cli::run(&cli) {
        Ok(outcome) => {
            let mut stdout = std::io::stdout().lock();
            let _ = if cli.json {
                writeln!(stdout, "{}", outcome.json)
            } else {
                write!(stdout, "{}", outcome.text)
            };
            if outcome.success {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            if cli.json {
                println!("{}", serde_json::json!({ "error": e.to_string() }));
            }
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
