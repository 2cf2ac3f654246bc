use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use codesign_lab_cli::{run, AnalysisConfig, CliError, Command, PresetResolver};

/// Co-design analyses for large-model training and inference hardware.
#[derive(Debug, Parser)]
#[command(name = "codesign-lab", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// TOML analysis config. Built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Also write the JSON report here.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn execute(args: &Args) -> anyhow::Result<()> {
    let mut config = match &args.config {
        Some(path) => AnalysisConfig::load(path)?,
        None => AnalysisConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let report = run(args.command, &config, &PresetResolver::from_env())?;
    print!("{}", report.render());
    if let Some(path) = &args.json {
        std::fs::write(path, report.to_json_string()).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<CliError>().map_or(1, CliError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
