//! `sparsenet` command-line tool.

mod args;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command, ConfigFile};
use sparsenet::synth::DEFAULT_SEED;

pub const THREADS_ENV: &str = "SPARSENET_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Core(#[from] sparsenet::Error),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    NotConverged(String),
}

impl CliError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(sparsenet::Error::NotConverged { .. }) | CliError::NotConverged(_) => 3,
            CliError::Core(sparsenet::Error::AgreementFailure { .. }) => 4,
            _ => 2,
        }
    }
}

/// `--threads`, then the environment, then the config file.
fn resolve_threads(flag: Option<usize>, config: Option<usize>) -> Result<Option<usize>, CliError> {
    if flag.is_some() {
        return Ok(flag);
    }
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let t = v
            .trim()
            .parse::<usize>()
            .map_err(|_| CliError::Usage(format!("{THREADS_ENV} must be a non-negative integer, got {v:?}")))?;
        return Ok(Some(t));
    }
    Ok(config)
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let config = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            toml::from_str::<ConfigFile>(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        }
        None => ConfigFile::default(),
    };
    let command = match (cli.command, &config.command) {
        (Some(c), Some(named)) if c.name() != named => {
            return Err(CliError::Usage(format!(
                "command line runs {} but the config file names {named}",
                c.name()
            )))
        }
        (Some(c), _) => c,
        (None, Some(named)) => {
            Command::empty(named).ok_or_else(|| CliError::Usage(format!("unknown command {named:?} in config")))?
        }
        (None, None) => return Err(CliError::Usage("no command given (see --help)".into())),
    };
    let ctx = run::Context {
        output: cli.output.or(config.output.clone()).unwrap_or_else(|| PathBuf::from(".")),
        seed: cli.seed.or(config.seed).unwrap_or(DEFAULT_SEED),
        threads: resolve_threads(cli.threads, config.threads)?,
    };
    let command = config.apply(command);
    if let (Some(t), false) = (ctx.threads, matches!(command, Command::Bench(_))) {
        // The benchmark builds its own pool.
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot start thread pool: {e}")))?;
    }
    run::ensure_dir(&ctx.output)?;
    log::debug!("running {} with seed {}", command.name(), ctx.seed);
    match command {
        Command::Normalize(a) => run::normalize(&ctx, a),
        Command::Corr(a) => run::corr(&ctx, a),
        Command::CrossCorr(a) => run::cross_corr(&ctx, a),
        Command::SparseCorr(a) => run::sparse_corr(&ctx, a),
        Command::Glasso(a) => run::glasso(&ctx, a),
        Command::Partial(a) => run::partial(&ctx, a),
        Command::Filtration(a) => run::filtration(&ctx, a),
        Command::Bench(a) => run::bench(&ctx, a),
        Command::Rank(a) => run::rank(&ctx, a),
        Command::Synth(a) => run::synth(&ctx, a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
