//! `foothold`: terrain generation, scripted reconstruction walks, perception
//! evaluation, curriculum sweeps and reports.
//!
//! Exit codes: 0 ok, 1 runtime failure, 2 configuration error, 3 property
//! check failure.

mod commands;
mod options;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use options::{CliError, RESOLVED_FILE};

#[derive(Parser)]
#[command(name = "foothold", version, about = "Sparse-foothold terrain and perception pipelines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a terrain and write its heightfield, safety mask and edge distances.
    Generate(RunArgs),
    /// Walk a straight line while reconstructing the local heightmap.
    Walk(RunArgs),
    /// Evaluate planners across terrain kinds, difficulties and perceptions.
    Evaluate(RunArgs),
    /// Run the adaptive sampling curriculum over a stream of episodes.
    Sweep(RunArgs),
    /// Summarize an aggregate CSV.
    Report(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Per-key overrides, `--key value`.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "--KEY VALUE")]
    overrides: Vec<String>,
}

type Runner = fn(&foothold_core::config::KvConfig, &std::path::Path) -> Result<(), CliError>;

fn run(cli: Cli) -> Result<(), CliError> {
    let (args, defaults, runner): (RunArgs, _, Runner) = match cli.command {
        Command::Generate(a) => (a, commands::GENERATE_DEFAULTS, commands::generate),
        Command::Walk(a) => (a, commands::WALK_DEFAULTS, commands::walk),
        Command::Evaluate(a) => (a, commands::EVALUATE_DEFAULTS, commands::evaluate),
        Command::Sweep(a) => (a, commands::SWEEP_DEFAULTS, commands::sweep),
        Command::Report(a) => (a, commands::REPORT_DEFAULTS, commands::report),
    };
    let extra = options::parse_overrides(&args.overrides)?;
    let config_path = extra.config.or(args.config);
    let out = extra.out.unwrap_or(args.out);
    let cfg = options::resolve(defaults, config_path.as_deref(), &extra.pairs)?;
    std::fs::create_dir_all(&out)
        .map_err(|e| CliError::Runtime(anyhow::anyhow!("creating {}: {e}", out.display())))?;
    std::fs::write(out.join(RESOLVED_FILE), cfg.to_text())
        .map_err(|e| CliError::Runtime(anyhow::anyhow!("writing resolved config: {e}")))?;
    runner(&cfg, &out)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("foothold: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
