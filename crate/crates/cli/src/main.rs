use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use saddlecert_cli::{run, Args};

fn main() -> ExitCode {
    let args = Args::parse();
    let outcome = run(&args, &mut std::io::stderr());
    if let Some(message) = &outcome.error {
        eprintln!("saddlecert: error: {message}");
    }
    let mut stdout = std::io::stdout().lock();
    let _ = stdout.write_all(outcome.stdout.as_bytes());
    let _ = stdout.flush();
    ExitCode::from(outcome.code as u8)
}
