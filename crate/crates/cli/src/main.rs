//! `digitdrift`: exact laws of `s(n + r) - s(n)` from the command line.
//!
//! Exit codes: 0 success, 1 invariant or bound violation, 2 usage or
//! validation error.

mod args;
mod commands;
mod failure;
mod input;
mod report;

use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use digitdrift_core::cache::DistributionCache;

use args::{Cli, Command, Format};
use failure::Failure;

/// Flags shared by every command.
pub struct Context {
    pub format: Format,
    pub radix_input: bool,
    cache_dir: Option<PathBuf>,
}

impl Context {
    pub fn cache(&self) -> Option<DistributionCache> {
        self.cache_dir.as_ref().map(DistributionCache::new)
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Failure::usage(e.to_string()))?;
    }
    let ctx = Context {
        format: cli.format,
        radix_input: cli.radix_input,
        cache_dir: (!cli.no_cache).then_some(cli.cache_dir),
    };
    let stdout = io::stdout();
    let mut out = io::BufWriter::new(stdout.lock());
    let result = match &cli.command {
        Command::Dist(a) => commands::dist::run(&ctx, a, &mut out),
        Command::Verify(a) => commands::verify::run(&ctx, a, &mut out),
        Command::Simulate(a) => commands::simulate::run(&ctx, a, &mut out),
        Command::Clt(a) => commands::clt::run(&ctx, a, &mut out),
        Command::Phi(a) => commands::phi::run(&ctx, a, &mut out),
        Command::Blocks(a) => commands::blocks::run(&ctx, a, &mut out),
    };
    out.flush()?;
    result
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{f}");
            ExitCode::from(f.exit_code())
        }
    }
}
