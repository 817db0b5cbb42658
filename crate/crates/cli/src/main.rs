mod args;
mod commands;
mod output;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

use args::Cli;
use output::{config_path, resolve_out, to_json, Failure};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("fbmx: {f}");
            ExitCode::from(f.code as u8)
        }
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    if cli.global.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.global.threads)
            .build_global()
            .map_err(|e| Failure::usage(format!("cannot start {} threads: {e}", cli.global.threads)))?;
    }
    let result = commands::execute(&cli.command, &cli.global)?;
    let config = to_json(&result.config);
    match &cli.global.out {
        Some(out) => {
            let path = resolve_out(out);
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(&path, &result.body)?;
            std::fs::write(config_path(&path), config)?;
        }
        None => {
            std::io::stdout().write_all(result.body.as_bytes())?;
            eprint!("{config}");
        }
    }
    match result.check {
        Some(Err(msg)) if cli.global.assert => Err(Failure { code: 5, message: format!("assertion failed: {msg}") }),
        Some(Err(msg)) => {
            eprintln!("fbmx: check failed: {msg}");
            Ok(())
        }
        _ => Ok(()),
    }
}
