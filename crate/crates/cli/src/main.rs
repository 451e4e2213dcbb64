use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use nmqsd_cli::{dispatch, parse_config, CliError, Command, RunConfig};

/// Non-Markovian QSD simulator for a qubit-qutrit pair in a common bath.
#[derive(Debug, Parser)]
#[command(name = "nmqsd", version)]
struct Cli {
    /// `key = value` configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Directory for CSV and .meta files.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    /// Overrides `seed`.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Overrides `n_traj`.
    #[arg(long, global = true, value_name = "N")]
    traj: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

fn load(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Io {
                    context: format!("reading {}", path.display()),
                    source: e,
                })?;
            parse_config(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.params.seed = seed;
    }
    if let Some(n) = cli.traj {
        cfg.params.n_traj = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = load(&cli).and_then(|cfg| dispatch(&cli.command, &cfg, &cli.out));
    match result {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
