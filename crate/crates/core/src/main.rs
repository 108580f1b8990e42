use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use lfgeom::cli::{render, run, RunConfig};

fn main() -> ExitCode {
    let cfg = RunConfig::parse();
    let result = run(&cfg).and_then(|outcome| Ok((render(&cfg, &outcome)?, outcome.code)));
    match result {
        Ok((text, code)) => {
            if let Some(text) = text {
                let _ = std::io::stdout().write_all(text.as_bytes());
            }
            ExitCode::from(code as u8)
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.code as u8)
        }
    }
}
