use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cqed_cli::config::{parse_file, resolve, seed_config, ConfigFile, Model};
use cqed_cli::run::{run, run_compare, RunError};
use cqed_cli::sweep::{parse_sweep, run_sweep, seed_sweep};

#[derive(Parser)]
#[command(name = "cqed", version, about = "Atom-cavity dynamics at arbitrary coupling strength")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Also write SVG plots.
    #[arg(long, global = true)]
    svg: bool,
    /// Print a template config for the subcommand and exit.
    #[arg(long, global = true)]
    seed_config: bool,
    /// Worker threads for `sweep` (default: one per core).
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Product-state (α, β, s) dynamics.
    Meanfield,
    /// Integrated Fock-space amplitudes.
    Fock,
    /// Exact propagation by eigendecomposition.
    Oracle,
    /// Closed-form rotating-wave solution.
    Rwa,
    /// Grid of runs over ω₀, ω_λ and |g|.
    Sweep,
    /// fock, oracle and rwa on one config, with cross-differences.
    Compare,
}

impl Command {
    fn model(self) -> Option<Model> {
        match self {
            Command::Meanfield => Some(Model::Meanfield),
            Command::Fock => Some(Model::Fock),
            Command::Oracle => Some(Model::Oracle),
            Command::Rwa => Some(Model::Rwa),
            Command::Sweep | Command::Compare => None,
        }
    }
}

fn fail(err: &RunError) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(err.exit_code() as u8)
}

fn read(path: &Option<PathBuf>) -> Result<String, RunError> {
    let Some(path) = path else {
        return Err(cqed_cli::ConfigError::Semantic {
            field: "--config".into(),
            message: "a config file is required".into(),
        }
        .into());
    };
    std::fs::read_to_string(path).map_err(|source| RunError::Io {
        path: path.clone(),
        source,
    })
}

fn apply_overrides(file: &mut ConfigFile, cli: &Cli) {
    if let Some(dir) = &cli.out {
        file.output.dir = Some(dir.to_string_lossy().into_owned());
    }
    if cli.svg {
        file.output.svg = Some(true);
    }
}

fn execute(cli: &Cli) -> Result<String, RunError> {
    let text = read(&cli.config)?;
    match cli.command {
        Command::Sweep => {
            let mut file = parse_sweep(&text)?;
            apply_overrides(&mut file.template, cli);
            let dir = PathBuf::from(file.template.output.dir.clone().unwrap_or_else(|| "out".into()));
            let rows = run_sweep(&file, cli.jobs.unwrap_or(0), &dir)?;
            let failed = rows.iter().filter(|r| r.failed()).count();
            Ok(format!(
                "{} grid points, {failed} failed; wrote {}",
                rows.len(),
                dir.join("sweep.csv").display()
            ))
        }
        Command::Compare => {
            let mut file = parse_file(&text)?;
            apply_overrides(&mut file, cli);
            let model = file.model.unwrap_or(Model::Fock);
            let spec = resolve(file, Some(model))?;
            let report = run_compare(&spec)?;
            Ok(serde_json::to_string_pretty(&report.deltas).expect("deltas serialize"))
        }
        cmd => {
            let mut file = parse_file(&text)?;
            apply_overrides(&mut file, cli);
            let spec = resolve(file, cmd.model())?;
            let summary = run(&spec)?;
            Ok(serde_json::to_string_pretty(&summary).expect("summary serializes"))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.seed_config {
        let text = match cli.command {
            Command::Sweep => seed_sweep(),
            cmd => seed_config(cmd.model().unwrap_or(Model::Fock)),
        };
        print!("{text}");
        return ExitCode::SUCCESS;
    }
    match execute(&cli) {
        Ok(report) => {
            println!("{report}");
            ExitCode::SUCCESS
        }
        Err(err) => fail(&err),
    }
}

