//! `gramevo` — seeded, reproducible experiment runner and grammar tooling
//! for the grammar-guided evolution library.
//!
//! Exit codes: 0 success (including `--help`/`--version`), 1 usage or
//! configuration errors, 2 I/O errors.

/// Writes command output to stdout. When the reader closes the pipe early
/// (`gramevo ... | head`) the process exits quietly instead of panicking;
/// any other stdout failure is a regular I/O error.
macro_rules! outln {
    ($($arg:tt)*) => {
        $crate::write_stdout(format_args!("{}\n", format_args!($($arg)*)))
    };
}

mod compare;
mod config;
mod grammar_cmd;
mod run;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

pub(crate) fn write_stdout(args: std::fmt::Arguments<'_>) {
    let mut out = std::io::stdout().lock();
    if let Err(err) = out.write_fmt(args) {
        if err.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        eprintln!("error: stdout: {err}");
        std::process::exit(2);
    }
}

/// One error type across all subcommands, carrying its exit code class.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, configs, grammars, or file contents.
    Usage(String),
    /// Filesystem and OS-level failures.
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Io(m) => m,
        }
    }
}

/// Wraps a filesystem error with the path it concerns.
pub fn io_error(path: &std::path::Path, err: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {err}", path.display()))
}

#[derive(Parser)]
#[command(
    name = "gramevo",
    version,
    about = "Grammar-guided evolution experiments with seeded, reproducible outputs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a batch of seeded experiments described by a spec file
    Run {
        /// Path to the `key = value` experiment spec
        #[arg(long)]
        spec: PathBuf,
    },
    /// Validate, transform, or enumerate grammar files
    Grammar {
        #[command(subcommand)]
        command: GrammarCommand,
    },
    /// Compare final train fitness of two result directories (rank test)
    Compare {
        /// Directory holding the first batch's summary.csv
        dir_a: PathBuf,
        /// Directory holding the second batch's summary.csv
        dir_b: PathBuf,
    },
}

#[derive(Subcommand)]
enum GrammarCommand {
    /// Parse and validate a grammar, printing a structure report
    Check {
        /// Grammar file in BNF format
        file: PathBuf,
        /// Input dimension the `x[n]` macro expands against
        #[arg(long, default_value_t = 1)]
        dim: usize,
    },
    /// Apply a grouping spec and emit the regrouped grammar
    Transform {
        /// Grammar file in BNF format
        file: PathBuf,
        /// Grouping spec file (`split <source> -> <new>: i,j` lines)
        #[arg(long)]
        groups: PathBuf,
        /// Write the transformed grammar here instead of stdout
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Input dimension the `x[n]` macro expands against
        #[arg(long, default_value_t = 1)]
        dim: usize,
    },
    /// Print every phenotype derivable within a depth limit, sorted
    Enumerate {
        /// Grammar file in BNF format
        file: PathBuf,
        /// Maximum derivation-tree depth (the root counts as level 1)
        #[arg(long)]
        depth: usize,
        /// Input dimension the `x[n]` macro expands against
        #[arg(long, default_value_t = 1)]
        dim: usize,
    },
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { spec } => run::cmd_run(&spec),
        Command::Grammar { command } => match command {
            GrammarCommand::Check { file, dim } => grammar_cmd::cmd_check(&file, dim),
            GrammarCommand::Transform { file, groups, output, dim } => {
                grammar_cmd::cmd_transform(&file, &groups, output.as_deref(), dim)
            }
            GrammarCommand::Enumerate { file, depth, dim } => {
                grammar_cmd::cmd_enumerate(&file, depth, dim)
            }
        },
        Command::Compare { dir_a, dir_b } => compare::cmd_compare(&dir_a, &dir_b),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // clap exits 2 on usage errors by default; this tool reserves 2
            // for I/O, so route argument problems to 1 and help/version to 0.
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message());
            ExitCode::from(err.exit_code())
        }
    }
}
