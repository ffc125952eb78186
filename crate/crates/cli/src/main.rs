//! `iotforge`: check, build, map, link and run IoT application projects.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use iotforge_core::sim::DEFAULT_UNTIL_MS;

#[derive(Parser, Debug)]
#[command(name = "iotforge", version, about = "Compile, map, link and simulate IoT application projects")]
struct Cli {
    /// Diagnostic output format.
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse and validate every spec file.
    Check { root: PathBuf },
    /// Generate framework artifacts with a plug-in.
    Build {
        root: PathBuf,
        #[arg(long, default_value = "sim-descriptor")]
        plugin: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Assign services to devices.
    Map {
        root: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "random")]
        strategy: String,
        /// Plan file; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write one deployment package per device.
    Link {
        root: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Use a plan written by `map` instead of mapping again.
        #[arg(long)]
        plan: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate the linked application against its traces.
    Run {
        root: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Virtual time limit in milliseconds.
        #[arg(long, default_value_t = DEFAULT_UNTIL_MS)]
        until: u64,
        /// Where to write the JSON Lines run log.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// check, build, map, link and run in order, stopping at the first failure.
    Pipeline {
        root: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_UNTIL_MS)]
        until: u64,
        #[arg(long, default_value = "iotforge-out")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = commands::Output::new(cli.format);
    let result = match cli.command {
        Command::Check { root } => commands::check(&out, &root).map(|_| ()),
        Command::Build { root, plugin, out: dir } => commands::build(&out, &root, &plugin, &dir),
        Command::Map {
            root,
            seed,
            strategy,
            out: file,
        } => commands::map(&out, &root, seed, &strategy, file.as_deref()),
        Command::Link {
            root,
            seed,
            plan,
            out: dir,
        } => commands::link(&out, &root, seed, plan.as_deref(), &dir),
        Command::Run { root, seed, until, log } => commands::run(&out, &root, seed, until, log.as_deref()),
        Command::Pipeline { root, seed, until, out: dir } => commands::pipeline(&out, &root, seed, until, &dir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            out.error(&e);
            ExitCode::from(e.exit_code())
        }
    }
}
