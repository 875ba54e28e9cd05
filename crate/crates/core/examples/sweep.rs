//! Phase diagram over a `(λ, μ)` ladder through the batch interface; prints
//! the CSV table.

use fracsemi::cli::{run_command, Command, RunConfig};

fn main() -> fracsemi::Result<()> {
    let cfg = RunConfig::parse(
        r#"{
            "s": 0.25, "n": 128,
            "lambda": {"from": 2.0, "to": 32.0, "points": 5, "scale": "geometric"},
            "mu": {"from": 0.0, "to": 0.9, "points": 4, "scale": "linear", "relative": true}
        }"#,
    )?;
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let out = run_command(&cfg, Command::Sweep, workers)?;
    for (name, body) in &out.files {
        println!("{name}:\n{body}");
    }
    println!("passed: {}", out.passed);
    Ok(())
}
