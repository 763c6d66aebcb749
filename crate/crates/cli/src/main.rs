mod args;
mod commands;
mod config;

use std::process::ExitCode;

use clap::Parser;

use args::Cli;

/// Exit status 2 for bad input, 3 for infeasible or numerically failed
/// computations, 1 when `reproduce` reports a failed criterion.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Compute(String),
    CriteriaFailed(usize),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            Self::Compute(_) => 3,
            Self::CriteriaFailed(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Config(m) => write!(f, "configuration error: {m}"),
            Self::Compute(m) => write!(f, "computation failed: {m}"),
            Self::CriteriaFailed(n) => write!(f, "{n} criteria failed"),
        }
    }
}

impl From<ldpcl::Error> for CliError {
    fn from(e: ldpcl::Error) -> Self {
        use ldpcl::Error as E;
        match e {
            E::Infeasible(_) | E::Numerical(_) | E::Degenerate(_) | E::ResourceGuard(_) => Self::Compute(e.to_string()),
            _ => Self::Config(e.to_string()),
        }
    }
}

fn run() -> Result<(), CliError> {
    let argv = config::expand(std::env::args_os().collect())?;
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return Err(CliError::Config("invalid arguments".into()));
        }
        Err(e) => {
            // help and version
            let _ = e.print();
            return Ok(());
        }
    };
    if let Some(threads) = cli.global.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    commands::run(&cli)
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ldpcl: {e}");
            ExitCode::from(e.code())
        }
    }
}
