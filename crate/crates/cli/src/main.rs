use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use meanfield_cli::config::{self, preset, Experiment};
use meanfield_cli::output::{self, Status};
use meanfield_cli::{parse_config, run_experiment, RunConfig};

const EXIT_THRESHOLD: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

/// Experiments on symmetric n-player games with mean-field interaction.
#[derive(Parser, Debug)]
#[command(name = "meanfield", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Config file, or the name of a built-in preset.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<String>,

    /// Root seed, overriding `mc.seed`.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,

    /// Output directory (default: $MEANFIELD_OUT, then ./meanfield-out).
    #[arg(long, global = true, value_name = "DIR", env = "MEANFIELD_OUT")]
    out: Option<PathBuf>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Probe the scenario coefficients.
    Validate,
    /// Simulate the n-player system and tabulate path moments.
    Simulate,
    /// Nash gap of a symmetric profile within a policy class.
    NashGap,
    /// Fixed-point iteration for strong solutions.
    MfgSolve,
    /// Closed-form strong and weak solutions of the signed example.
    Example33,
    /// Coupling rate between the n-player and 1-modified systems.
    ChaosRate,
    /// Pathwise propagation of the weak solution.
    Propagation,
    /// Distance of converse equilibria to the weak solution.
    Limit,
    /// Wasserstein distance between independent terminal clouds.
    Wasserstein,
    /// Approximate equilibria built from the weak solution.
    Converse,
    /// Run whatever experiment the config names.
    Run,
    /// List the built-in presets.
    Presets,
}

impl Command {
    fn experiment(self) -> Option<Experiment> {
        Some(match self {
            Command::Validate => Experiment::Validate,
            Command::Simulate => Experiment::Simulate,
            Command::NashGap => Experiment::NashGap,
            Command::MfgSolve => Experiment::MfgSolve,
            Command::Example33 => Experiment::Example33,
            Command::ChaosRate => Experiment::ChaosRate,
            Command::Propagation => Experiment::Propagation,
            Command::Limit => Experiment::Limit,
            Command::Wasserstein => Experiment::Wasserstein,
            Command::Converse => Experiment::Converse,
            Command::Run | Command::Presets => return None,
        })
    }
}

fn usage(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(EXIT_USAGE)
}

fn load(cli: &Cli) -> Result<RunConfig, String> {
    let text = match (&cli.config, cli.command.experiment()) {
        (Some(spec), _) if Path::new(spec).is_file() => {
            std::fs::read_to_string(spec).map_err(|e| format!("cannot read {spec}: {e}"))?
        }
        (Some(spec), _) => preset(spec)
            .ok_or_else(|| format!("`{spec}` is neither a file nor a preset (see `meanfield presets`)"))?
            .to_string(),
        (None, Some(exp)) => preset(exp.default_preset()).expect("every command has a preset").to_string(),
        (None, None) => return Err("`run` needs --config".into()),
    };
    let mut config = parse_config(&text).map_err(|e| e.to_string())?;
    if let Some(exp) = cli.command.experiment() {
        if config.experiment != exp {
            return Err(format!("config runs `{}`, not `{exp}`", config.experiment));
        }
    }
    if let Some(seed) = cli.seed {
        config.mc.seed = seed;
    }
    if cli.threads.is_some() {
        config.threads = cli.threads;
    }
    config.validate().map_err(|e| e.to_string())?;
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.command == Command::Presets {
        for name in config::preset_names() {
            println!("{name}");
        }
        return ExitCode::SUCCESS;
    }
    let config = match load(&cli) {
        Ok(c) => c,
        Err(msg) => return usage(msg),
    };
    let dir = cli
        .out
        .clone()
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from("meanfield-out"));
    if let Some(threads) = config.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    }

    let manifest = output::manifest(&config);
    let (mut files, summary, code) = match run_experiment(&config) {
        Ok(outcome) => {
            let code = if outcome.passed() { 0 } else { EXIT_THRESHOLD };
            let summary = output::summary(&config, Status::Finished(&outcome));
            (outcome.files, summary, code)
        }
        Err(e) => {
            let msg = e.to_string();
            eprintln!("error: {msg}");
            (Vec::new(), output::summary(&config, Status::Failed(&msg)), EXIT_RUNTIME)
        }
    };
    files.push(("manifest.toml".into(), manifest));
    files.push(("summary.txt".into(), summary.clone()));
    if let Err(e) = output::write_files(&dir, &files) {
        eprintln!("error: writing {}: {e}", dir.display());
        return ExitCode::from(EXIT_RUNTIME);
    }
    print!("{summary}");
    println!("output: {}", dir.display());
    ExitCode::from(code)
}
