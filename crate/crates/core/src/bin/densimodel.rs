use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use densimodel::cli::{run, Command, Flags, EXIT_FAILURE, EXIT_PARSE};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    Model,
    Density,
    Oracle,
    Conjecture,
    Selfcheck,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Model => Command::Model,
            Cmd::Density => Command::Density,
            Cmd::Oracle => Command::Oracle,
            Cmd::Conjecture => Command::Conjecture,
            Cmd::Selfcheck => Command::Selfcheck,
        }
    }
}

/// Smooth integral models and local densities of quadratic lattices.
#[derive(Debug, Parser)]
#[command(name = "densimodel", version)]
struct Args {
    command: Cmd,
    specfile: PathBuf,
    /// Initial working precision (π-adic digits).
    #[arg(long)]
    precision: Option<u32>,
    /// Enumeration / search budget in points.
    #[arg(long)]
    budget: Option<u128>,
    /// Highest level for the oracle.
    #[arg(long)]
    kmax: Option<u32>,
    /// Exit with status 5 if the conjecture check fails.
    #[arg(long)]
    strict: bool,
    #[arg(long)]
    no_cache: bool,
    #[arg(long)]
    pretty: bool,
    /// Cache directory (overrides DENSIMODEL_CACHE_DIR).
    #[arg(long)]
    cache_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_PARSE as u8 } else { 0 });
        }
    };
    let text = match std::fs::read_to_string(&args.specfile) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.specfile.display());
            return ExitCode::from(EXIT_FAILURE as u8);
        }
    };
    let flags = Flags {
        precision: args.precision,
        budget: args.budget,
        kmax: args.kmax,
        strict: args.strict,
        no_cache: args.no_cache,
        pretty: args.pretty,
        cache_dir: args.cache_dir,
    };
    let out = run(args.command.into(), &text, &flags);
    print!("{}", out.stdout);
    eprint!("{}", out.stderr);
    ExitCode::from(out.exit_code as u8)
}
