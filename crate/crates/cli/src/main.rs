mod commands;
mod config;
mod error;
mod inputs;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mlte::{ArtifactKind, ValueKind};
use tracing_subscriber::EnvFilter;

use crate::config::Settings;

/// Machine-learning requirement specs, evidence, validation and reports.
#[derive(Debug, Parser)]
#[command(name = "mlte", version, about)]
struct Cli {
    #[command(flatten)]
    session: SessionArgs,

    /// Log more to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct SessionArgs {
    /// Model name.
    #[arg(long, global = true, env = "MLTE_MODEL")]
    model: Option<String>,

    /// Model version.
    #[arg(long = "model-version", global = true, env = "MLTE_VERSION")]
    model_version: Option<String>,

    /// Artifact store: local://<path>, http://host:port or host:port.
    #[arg(long, global = true, env = "MLTE_STORE")]
    store: Option<String>,

    /// Configuration file consulted for anything not given by flag or
    /// environment.
    #[arg(long, global = true, default_value = config::DEFAULT_CONFIG_FILE)]
    config: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Manage requirement specifications.
    #[command(subcommand)]
    Spec(SpecCommand),
    /// Store an externally computed metric as evidence.
    Ingest {
        #[arg(long)]
        id: String,
        #[arg(long, value_parser = parse_value_kind)]
        kind: ValueKind,
        /// Literal: a number, or a JSON object for opaque values.
        #[arg(long, allow_hyphen_values = true)]
        value: String,
    },
    /// Run a command, sample its CPU and memory use and store the result.
    Measure {
        #[arg(long)]
        id: String,
        #[arg(long, default_value_t = mlte::harness::DEFAULT_INTERVAL_MS)]
        interval_ms: u64,
        /// Kill the command after this many seconds.
        #[arg(long)]
        timeout_s: Option<f64>,
        #[arg(last = true, required = true, num_args = 1..)]
        command: Vec<String>,
    },
    /// Evaluate bound evidence against the spec and save a report.
    Validate {
        /// Property to list of {value_id, condition, stat_field?}, JSON or YAML.
        #[arg(long)]
        bindings: PathBuf,
        /// Save an incomplete report instead of failing on unbound
        /// properties.
        #[arg(long)]
        allow_incomplete: bool,
        #[arg(long, default_value = mlte::store::DEFAULT_IDENTIFIER)]
        spec_id: String,
        #[arg(long, default_value = mlte::store::DEFAULT_IDENTIFIER)]
        report_id: String,
    },
    /// Render the latest report.
    Report {
        #[arg(long, value_enum, default_value_t = Format::Html)]
        format: Format,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = mlte::store::DEFAULT_IDENTIFIER)]
        id: String,
        #[arg(long)]
        revision: Option<u64>,
    },
    /// List stored artifacts.
    List {
        #[arg(long, value_parser = parse_artifact_kind)]
        kind: Option<ArtifactKind>,
    },
    /// Show the built-in property catalog.
    Catalog,
    /// Serve a local store over HTTP until interrupted.
    Serve {
        #[arg(long)]
        root: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
}

#[derive(Debug, Subcommand)]
enum SpecCommand {
    /// Validate a spec file and save it.
    New {
        #[arg(long)]
        file: PathBuf,
        #[arg(long, default_value = mlte::store::DEFAULT_IDENTIFIER)]
        id: String,
    },
    /// Print a stored spec as JSON.
    Show {
        #[arg(long, default_value = mlte::store::DEFAULT_IDENTIFIER)]
        id: String,
        #[arg(long)]
        revision: Option<u64>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Html,
}

fn parse_value_kind(s: &str) -> Result<ValueKind, String> {
    s.parse()
}

fn parse_artifact_kind(s: &str) -> Result<ArtifactKind, String> {
    s.parse().map_err(|e: mlte::ArtifactError| e.to_string())
}

fn init_logging(verbose: u8, serving: bool) {
    let default = match (verbose, serving) {
        (0, false) => "warn",
        (0, true) | (1, _) => "info",
        _ => "debug",
    };
    let filter = EnvFilter::try_from_env("MLTE_LOG").unwrap_or_else(|_| EnvFilter::new(default));
    tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .with_target(false)
        .init();
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose, matches!(cli.command, Command::Serve { .. }));
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}

fn run(cli: Cli) -> Result<u8, error::CliError> {
    let needs_session = !matches!(cli.command, Command::Catalog | Command::Serve { .. });
    let context = if needs_session {
        let flags = Settings {
            model: cli.session.model,
            version: cli.session.model_version,
            store: cli.session.store,
        };
        Some(
            flags
                .or(Settings::from_file(&cli.session.config)?)
                .context()?,
        )
    } else {
        None
    };
    let ctx = || context.as_ref().expect("session resolved for this command");

    match cli.command {
        Command::Spec(SpecCommand::New { file, id }) => commands::spec_new(ctx(), &file, &id),
        Command::Spec(SpecCommand::Show { id, revision }) => {
            commands::spec_show(ctx(), &id, revision)
        }
        Command::Ingest { id, kind, value } => commands::ingest(ctx(), &id, kind, &value),
        Command::Measure {
            id,
            interval_ms,
            timeout_s,
            command,
        } => commands::measure(ctx(), &id, interval_ms, timeout_s, &command),
        Command::Validate {
            bindings,
            allow_incomplete,
            spec_id,
            report_id,
        } => commands::validate(ctx(), &bindings, allow_incomplete, &spec_id, &report_id),
        Command::Report {
            format,
            out,
            id,
            revision,
        } => {
            let format = match format {
                Format::Json => mlte::RenderFormat::Json,
                Format::Html => mlte::RenderFormat::Html,
            };
            commands::report(ctx(), format, out.as_deref(), &id, revision)
        }
        Command::List { kind } => commands::list(ctx(), kind),
        Command::Catalog => commands::catalog(),
        Command::Serve { root, port, host } => commands::serve(&root, &host, port),
    }
}
