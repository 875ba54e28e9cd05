//! Runs one command from a JSON configuration and writes the report and
//! profiles into a directory, as the command-line tool does.
//!
//! `cargo run --example batch_run -- <command> <config.json> <out-dir>`

use std::path::Path;

use clap::ValueEnum;
use fracsemi::cli::{run_command, write_outputs, Command, RunConfig};

fn main() -> fracsemi::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let [command, config, out] = args.as_slice() else {
        eprintln!("usage: batch_run <command> <config.json> <out-dir>");
        std::process::exit(2);
    };
    let command = Command::from_str(command, true).map_err(fracsemi::Error::Config)?;
    let cfg = RunConfig::load(Path::new(config))?;
    let output = run_command(&cfg, command, 1)?;
    write_outputs(Path::new(out), &output, true)?;
    println!("{}", serde_json::to_string_pretty(&output.report["certifications"])?);
    Ok(())
}
