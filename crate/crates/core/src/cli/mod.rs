//! Command-line front-end:
//! `dampkit <subcommand> --config <path> [--out <dir>] [--seed <int>]`.

pub mod config;
pub mod run;

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::Parser;

pub use config::{parse_config, ConfigError, ExperimentConfig};
pub use run::{run_subcommand, CliError, Command, RunContext};

pub const OUT_DIR_ENV: &str = "DAMPKIT_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "dampkit-out";

#[derive(Debug, Parser)]
#[command(name = "dampkit", version, about = "Lyapunov certificates and decay analysis for damped linear systems")]
pub struct Args {
    #[arg(value_enum)]
    pub command: Command,
    /// Experiment configuration (INI).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides the environment and the config.
    #[arg(long, env = OUT_DIR_ENV)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn execute(args: Args) -> Result<Vec<String>, CliError> {
    let text = fs::read_to_string(&args.config)
        .map_err(|e| CliError::MissingInput(format!("config {}: {e}", args.config.display())))?;
    let config = parse_config(&text)?;
    let out_dir = args
        .out
        .or_else(|| config.output.directory.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    let ctx = RunContext {
        config,
        config_text: text,
        config_path: args.config,
        out_dir,
        seed: args.seed,
    };
    let started = run::started_stamp();
    let outcome = run_subcommand(args.command, &ctx)?;
    let manifest = run::write_manifest(&ctx, args.command, &started, &outcome.files)?;
    let mut lines = outcome.notes;
    for file in outcome.files.iter().chain(std::iter::once(&manifest)) {
        lines.push(format!("wrote {}", ctx.out_dir.join(file).display()));
    }
    Ok(lines)
}

/// Runs the tool and returns the process exit status. Failures end with a
/// single `error: code=<Kind> message="..."` line on stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let first = e.to_string().lines().next().unwrap_or("").trim_start_matches("error: ").to_string();
            eprint!("{e}");
            let err = CliError::Usage(first);
            eprintln!("{}", err.line());
            return err.exit_code();
        }
    };
    match execute(args) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            0
        }
        Err(e) => {
            eprintln!("{}", e.line());
            e.exit_code()
        }
    }
}
