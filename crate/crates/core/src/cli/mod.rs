//! Command-line runner: `mismatch-bounds <doa|toa|consistency|divergence>`.

pub mod commands;
pub mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use thiserror::Error;

use config::{parse_document, take_common, ConsistencyRunConfig, DivergenceRunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("invalid config: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error("output: {0}")]
    Output(String),
    #[error(transparent)]
    Core(#[from] crate::Error),
}

#[derive(Debug, Parser)]
#[command(name = "mismatch-bounds", version, about = "MSE bounds for estimators under model mismatch")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct RunArgs {
    /// JSON config file
    #[arg(long)]
    pub config: PathBuf,
    /// Output file; standard output when absent
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Base seed, overriding the config
    #[arg(long)]
    pub seed: Option<u64>,
    /// Use the reduced-size profile
    #[arg(long)]
    pub fast: bool,
    /// Worker threads; all cores when absent
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// MSE and upper bound against the assumed arrival angle
    Doa(RunArgs),
    /// RMSE, bilateral bounds and MCRB against SNR for delay estimation
    Toa(RunArgs),
    /// Divergence growth and upper bound of the sample mean against N
    Consistency(RunArgs),
    /// Chi-square divergence of a Gaussian pair or two sample files
    Divergence(RunArgs),
}

impl Command {
    fn args(&self) -> &RunArgs {
        match self {
            Command::Doa(a) | Command::Toa(a) | Command::Consistency(a) | Command::Divergence(a) => a,
        }
    }
}

/// Product of one command: the main output and an optional line for stdout.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub body: String,
    pub trailer: Option<String>,
    pub path: Option<PathBuf>,
}

fn read_config(path: &Path) -> Result<serde_json::Map<String, serde_json::Value>, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    parse_document(&text)
}

/// Runs a parsed command without touching the output destination.
pub fn execute(command: &Command) -> Result<Output, CliError> {
    let args = command.args();
    let mut doc = read_config(&args.config)?;
    let scenario_seed = matches!(command, Command::Doa(_) | Command::Toa(_));
    let common = take_common(&mut doc, scenario_seed)?;
    let fast = args.fast || common.fast_profile;
    let path = args.out.clone().or(common.output_path);
    if let Some(seed) = args.seed {
        if scenario_seed {
            doc.insert("seed".into(), seed.into());
        }
    }
    let (body, trailer) = match command {
        Command::Doa(_) => (commands::cmd_doa(&config::doa_config(doc, fast)?)?, None),
        Command::Toa(_) => (commands::cmd_toa(&config::toa_config(doc, fast)?)?, None),
        Command::Consistency(_) => {
            let cfg: ConsistencyRunConfig = config::merge_onto(&ConsistencyRunConfig::default(), doc)?;
            let (csv, verdict) = commands::cmd_consistency(&cfg)?;
            (csv, Some(verdict))
        }
        Command::Divergence(_) => {
            let mut cfg: DivergenceRunConfig = serde_json::from_value(serde_json::Value::Object(doc))?;
            let base = args.config.parent().unwrap_or(Path::new("."));
            cfg.resolve_paths(base);
            (commands::cmd_divergence(&cfg)?, None)
        }
    };
    Ok(Output { body, trailer, path })
}

fn emit(output: &Output) -> Result<(), CliError> {
    let stdout_err = |source| CliError::Io { path: PathBuf::from("<stdout>"), source };
    let mut stdout = std::io::stdout().lock();
    match &output.path {
        Some(path) => {
            fs::write(path, &output.body).map_err(|source| CliError::Io { path: path.clone(), source })?
        }
        None => stdout.write_all(output.body.as_bytes()).map_err(stdout_err)?,
    }
    if let Some(line) = &output.trailer {
        writeln!(stdout, "{line}").map_err(stdout_err)?;
    }
    stdout.flush().map_err(stdout_err)
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let job = || execute(&cli.command).and_then(|o| emit(&o));
    match cli.command.args().threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?
            .install(job),
        None => job(),
    }
}

/// Process entry point; returns the exit code.
pub fn main_entry() -> i32 {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("mismatch-bounds: {e}");
            1
        }
    }
}
