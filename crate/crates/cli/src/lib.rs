//! `qbrown`: configuration-driven runs and verification for `qbrown-core`.
//!
//! Every run reads one JSON document, writes its artifacts into the output
//! directory together with `manifest.json`, and exits with
//! 0 (success), 1 (invalid input) or 2 (a numerical contract was violated).

pub mod commands;
pub mod config;
pub mod output;
pub mod verify;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, ValueEnum};
use serde::Serialize;
use serde_json::Value;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_CONTRACT: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    DsfScan,
    EvolveMe,
    EvolveFp,
    Coeffs,
    Verify,
    Choi,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::DsfScan => "dsf-scan",
            Command::EvolveMe => "evolve-me",
            Command::EvolveFp => "evolve-fp",
            Command::Coeffs => "coeffs",
            Command::Verify => "verify",
            Command::Choi => "choi",
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "qbrown",
    version,
    about = "Test-particle dynamics in an ideal quantum gas"
)]
pub struct Cli {
    pub command: Command,
    /// JSON configuration for the command.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overrides `output_dir` in the config).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed for randomized checks and estimators (overrides `seed` in the config).
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Failure of a run, classified by exit code.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Bad configuration or unusable paths.
    Validation(String),
    /// A numerical invariant or stability bound was violated.
    Contract(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Contract(_) => EXIT_CONTRACT,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "validation error: {m}"),
            CliError::Contract(m) => write!(f, "numerical contract violated: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<qbrown_core::Error> for CliError {
    fn from(e: qbrown_core::Error) -> Self {
        if e.is_validation() || matches!(e, qbrown_core::Error::Resource(_)) {
            CliError::Validation(e.to_string())
        } else {
            CliError::Contract(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Validation(format!("i/o: {e}"))
    }
}

/// What a command produced. `violation` is set when artifacts were written
/// but a checked contract failed.
#[derive(Debug, Default)]
pub struct RunOutput {
    pub artifacts: Vec<String>,
    pub monitors: Value,
    pub violation: Option<String>,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    status: &'a str,
    exit_code: i32,
    message: Option<String>,
    seed: u64,
    versions: Versions,
    wall_time_seconds: f64,
    config: Value,
    artifacts: Vec<String>,
    monitors: Value,
}

#[derive(Debug, Serialize)]
struct Versions {
    qbrown: &'static str,
    qbrown_core: &'static str,
}

const DEFAULT_OUT: &str = "qbrown-out";

/// Resolved run parameters shared by every command.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub out: PathBuf,
    pub seed: u64,
}

fn read_config(path: &Path) -> Result<Value, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("config is not valid JSON: {e}")))
}

fn resolve(cli: &Cli, config: &Value) -> Result<RunContext, CliError> {
    let out = match (&cli.out, config.get("output_dir")) {
        (Some(p), _) => p.clone(),
        (None, Some(Value::String(s))) => PathBuf::from(s),
        (None, Some(Value::Null) | None) => PathBuf::from(DEFAULT_OUT),
        (None, Some(_)) => {
            return Err(CliError::Validation(
                "invalid parameter `output_dir`: must be a string".into(),
            ))
        }
    };
    let seed = match (cli.seed, config.get("seed")) {
        (Some(s), _) => s,
        (None, Some(Value::Null) | None) => 0,
        (None, Some(v)) => v.as_u64().ok_or_else(|| {
            CliError::Validation("invalid parameter `seed`: must be a non-negative integer".into())
        })?,
    };
    Ok(RunContext { out, seed })
}

fn dispatch(command: Command, config: Value, ctx: &RunContext) -> Result<RunOutput, CliError> {
    fs::create_dir_all(&ctx.out).map_err(|e| {
        CliError::Validation(format!(
            "cannot create output_dir {}: {e}",
            ctx.out.display()
        ))
    })?;
    match command {
        Command::DsfScan => commands::dsf_scan(&parse(config)?, ctx),
        Command::EvolveMe => commands::evolve_me(&parse(config)?, ctx),
        Command::EvolveFp => commands::evolve_fp(&parse(config)?, ctx),
        Command::Coeffs => commands::coeffs(&parse(config)?, ctx),
        Command::Choi => commands::choi(&parse(config)?, ctx),
        Command::Verify => commands::verify(&parse(config)?, ctx),
    }
}

fn parse<T: serde::de::DeserializeOwned>(config: Value) -> Result<T, CliError> {
    serde_json::from_value(config).map_err(|e| CliError::Validation(format!("config: {e}")))
}

/// Run one scenario and return the process exit code. Diagnostics go to stderr.
pub fn run(cli: &Cli) -> i32 {
    let start = Instant::now();
    let config = match read_config(&cli.config) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("qbrown: {e}");
            return e.exit_code();
        }
    };
    let ctx = match resolve(cli, &config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("qbrown: {e}");
            return e.exit_code();
        }
    };
    let result = dispatch(cli.command, config.clone(), &ctx);
    let (code, status, message, out) = match result {
        Ok(out) => match out.violation.clone() {
            None => (EXIT_OK, "ok", None, out),
            Some(v) => (EXIT_CONTRACT, "contract_violation", Some(v), out),
        },
        Err(e) => {
            let status = if e.exit_code() == EXIT_VALIDATION {
                "validation_error"
            } else {
                "contract_violation"
            };
            (
                e.exit_code(),
                status,
                Some(e.to_string()),
                RunOutput::default(),
            )
        }
    };
    if let Some(m) = &message {
        eprintln!("qbrown: {m}");
    }
    let manifest = Manifest {
        command: cli.command.name(),
        status,
        exit_code: code,
        message,
        seed: ctx.seed,
        versions: Versions {
            qbrown: env!("CARGO_PKG_VERSION"),
            qbrown_core: qbrown_core::VERSION,
        },
        wall_time_seconds: start.elapsed().as_secs_f64(),
        config,
        artifacts: out.artifacts,
        monitors: out.monitors,
    };
    // the output directory may be the thing that failed
    if ctx.out.is_dir() {
        if let Err(e) = output::write_json(&ctx.out.join("manifest.json"), &manifest) {
            eprintln!("qbrown: cannot write manifest: {e}");
            return code.max(EXIT_VALIDATION);
        }
    }
    code
}
