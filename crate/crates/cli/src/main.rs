use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use tracing_subscriber::EnvFilter;

mod commands;
mod serve;

#[derive(Debug, Parser)]
#[command(name = "orgmem", version, about = "Organizational-memory chat service")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Overrides applied on top of the config file.
#[derive(Debug, Clone, clap::Args)]
pub struct Common {
    #[arg(long, default_value = "config.toml")]
    pub config: PathBuf,
    /// Retrieval depth and reference cap.
    #[arg(long)]
    pub k: Option<usize>,
    /// Answerability threshold.
    #[arg(long)]
    pub theta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Table,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Scaffold a workspace: a sample repository, its journal and a config.
    Init { root: PathBuf },
    /// Serve the WebSocket and HTTP adapter.
    Serve {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: String,
    },
    /// Adopt edits made directly in the repository and rebuild the index.
    Reindex {
        #[command(flatten)]
        common: Common,
        /// Author recorded on the adoption commit; defaults to the bot.
        #[arg(long)]
        author: Option<String>,
    },
    /// Answer one question without touching the audit log or state.
    Ask {
        #[command(flatten)]
        common: Common,
        /// Roster id to ask as.
        #[arg(long = "as")]
        user: Option<String>,
        question: String,
    },
    /// Feed a transcript (one event per line) through the simulated adapter.
    Replay {
        #[command(flatten)]
        common: Common,
        transcript: PathBuf,
        /// Audit log to write (replaced); defaults to the configured log.
        #[arg(long)]
        audit: Option<PathBuf>,
    },
    /// Summarize an audit log.
    Stats {
        #[command(flatten)]
        common: Common,
        /// Audit log to read; defaults to the configured log.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Write the report here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            EnvFilter::try_from_env("ORGMEM_LOG").unwrap_or_else(|_| EnvFilter::new("warn")),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Init { root } => commands::init(&root),
        Command::Serve { common, bind } => serve::run(&common, &bind),
        Command::Reindex { common, author } => commands::reindex(&common, author),
        Command::Ask {
            common,
            user,
            question,
        } => commands::ask(&common, user, &question),
        Command::Replay {
            common,
            transcript,
            audit,
        } => commands::replay(&common, &transcript, audit),
        Command::Stats {
            common,
            log,
            output,
            format,
        } => commands::stats(&common, log, output, format),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
