use std::path::PathBuf;
use std::process::ExitCode;

use carcasswatch::commands;
use carcasswatch::service::{self, AppState};
use carcasswatch::views::to_json;
use carcasswatch::{AppError, RunConfig};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "carcasswatch", version, about = "Spatio-temporal surveillance of coastal strandings")]
struct Cli {
    /// Config file; defaults to $CARCASSWATCH_CONFIG, then built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the model and write the artifact and report.
    Fit,
    /// Write the descriptive tables and cumulative series.
    Summarize,
    /// Print the control chart of one region and species group as JSON.
    Chart {
        #[arg(long)]
        region: String,
        #[arg(long)]
        group: String,
        /// Band level in (0, 1); defaults to the level stored with the fit.
        #[arg(long)]
        level: Option<f64>,
        #[arg(long)]
        artifact: Option<PathBuf>,
    },
    /// Serve the fitted artifact over HTTP.
    Serve {
        #[arg(long)]
        port: Option<u16>,
        #[arg(long)]
        artifact: Option<PathBuf>,
    },
    /// Parse the input and report accepted and rejected rows without fitting.
    Validate,
}

fn run(cli: Cli) -> Result<(), AppError> {
    let cfg = RunConfig::from_env(cli.config.as_deref())?;
    match cli.command {
        Command::Fit => {
            let out = commands::fit(&cfg)?;
            print!("{}", out.report);
            for p in out.written {
                eprintln!("wrote {}", p.display());
            }
        }
        Command::Summarize => {
            let out = commands::summarize(&cfg)?;
            println!(
                "{} animals in {} panel cells",
                out.data.panel.total(),
                out.data.panel.entries.len()
            );
            for p in out.written {
                eprintln!("wrote {}", p.display());
            }
        }
        Command::Chart {
            region,
            group,
            level,
            artifact,
        } => {
            let artifact = commands::load_artifact(&artifact.unwrap_or_else(|| cfg.artifact_path()))?;
            println!("{}", to_json(&commands::chart(&artifact, &region, &group, level)?));
        }
        Command::Serve { port, artifact } => {
            let artifact = commands::load_artifact(&artifact.unwrap_or_else(|| cfg.artifact_path()))?;
            let port = port.unwrap_or(cfg.port);
            if port == 0 {
                return Err(AppError::usage("port must lie in 1..=65535"));
            }
            let runtime = tokio::runtime::Runtime::new().map_err(|e| AppError::internal("serve", e.to_string()))?;
            runtime.block_on(service::serve(
                AppState {
                    artifact,
                    raster_deg: cfg.raster_deg,
                },
                port,
            ))?;
        }
        Command::Validate => {
            println!("{}", to_json(&commands::validate(&cfg)?));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
