//! Result directory layout: `manifest.toml`, one CSV per table and
//! `summary.txt`.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use crate::config::RunConfig;
use crate::runner::Outcome;

pub const CLI_VERSION: &str = env!("CARGO_PKG_VERSION");

/// The resolved configuration, itself a valid config file, preceded by
/// version comments.
pub fn manifest(config: &RunConfig) -> String {
    let mut text = String::new();
    writeln!(text, "# meanfield {CLI_VERSION}, meanfield-core {}", meanfield_core::VERSION).unwrap();
    writeln!(text, "# all random streams derive from mc.seed = {}", config.mc.seed).unwrap();
    writeln!(text, "# rerun: meanfield run --config manifest.toml").unwrap();
    text.push_str(&config.to_toml());
    text
}

pub enum Status<'a> {
    Finished(&'a Outcome),
    Failed(&'a str),
}

pub fn summary(config: &RunConfig, status: Status<'_>) -> String {
    let mut text = String::new();
    writeln!(text, "experiment: {}", config.experiment).unwrap();
    writeln!(text, "scenario: {:?}", config.scenario).unwrap();
    writeln!(text, "seed: {}", config.mc.seed).unwrap();
    match status {
        Status::Failed(error) => {
            writeln!(text, "status: error").unwrap();
            writeln!(text, "error: {error}").unwrap();
        }
        Status::Finished(outcome) => {
            writeln!(text, "status: {}", if outcome.passed() { "pass" } else { "fail" }).unwrap();
            if !outcome.values.is_empty() {
                writeln!(text, "\n[values]").unwrap();
                for (k, v) in &outcome.values {
                    writeln!(text, "{k}: {v}").unwrap();
                }
            }
            if !outcome.checks.is_empty() {
                writeln!(text, "\n[checks]").unwrap();
                for c in &outcome.checks {
                    let verdict = if c.passed { "pass" } else { "FAIL" };
                    writeln!(text, "{verdict} {}: {}", c.name, c.detail).unwrap();
                }
            }
        }
    }
    text
}

pub fn write_files(dir: &Path, files: &[(String, String)]) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    for (name, contents) in files {
        fs::write(dir.join(name), contents)?;
    }
    Ok(())
}
