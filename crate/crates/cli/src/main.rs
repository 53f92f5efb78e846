use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use wetting_cli::{run, CliError, Command, ExperimentConfig};

/// Run one experiment and write CSV tables plus a manifest.
///
/// Settings come from the defaults, then the config file, then the flags.
#[derive(Debug, Parser)]
#[command(name = "wetting", version)]
struct Args {
    command: Command,
    /// `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    /// Comma-separated system lengths.
    #[arg(long = "N", value_delimiter = ',')]
    n: Option<Vec<usize>>,
    #[arg(long)]
    a: Option<f64>,
    /// Values or start:stop:step ranges, comma-separated.
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    replicas: Option<usize>,
    /// Fixed exit-time cap for `meta`.
    #[arg(long = "t-cap")]
    t_cap: Option<f64>,
    /// Time horizon for `simulate`.
    #[arg(long)]
    horizon: Option<f64>,
}

fn config(args: Args) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::parse(
            &std::fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?,
        )?,
        None => ExperimentConfig::default(),
    };
    cfg.command = args.command;
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.out {
        cfg.out = v;
    }
    if let Some(v) = args.threads {
        cfg.threads = v;
    }
    if let Some(v) = args.n {
        cfg.n = v;
    }
    if let Some(v) = args.a {
        cfg.a = v;
    }
    if let Some(v) = args.lambda {
        cfg.lambda = wetting_cli::config::parse_grid("lambda", &v)?;
    }
    if let Some(v) = args.replicas {
        cfg.replicas = v;
    }
    if let Some(v) = args.t_cap {
        cfg.t_cap = Some(v);
    }
    if let Some(v) = args.horizon {
        cfg.horizon = v;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let result = config(Args::parse()).and_then(|cfg| run(&cfg).map(|m| (cfg, m)));
    match result {
        Ok((cfg, m)) => {
            println!(
                "{}: wrote {} files to {} in {:.2} s",
                m.command,
                m.files.len() + 1,
                cfg.out.display(),
                m.wall_clock_seconds
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
