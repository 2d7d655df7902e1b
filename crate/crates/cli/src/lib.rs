//! Design, analysis and simulation of series elastic actuator torque
//! controllers driven by a TOML run configuration. The `sea` binary is a
//! thin wrapper around [`execute`].

pub mod commands;
pub mod config;
pub mod design;
pub mod error;
pub mod output;


use std::path::PathBuf;

use clap::{ArgAction, Parser, Subcommand};

use commands::{Context, Protocol};
use config::{RunConfig, CONFIG_HELP};
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "sea", version, about = "Series elastic actuator torque controller toolkit")]
#[command(after_long_help = CONFIG_HELP)]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Base noise seed (overrides `seed`).
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Worker threads for independent runs.
    #[arg(long, global = true, value_name = "N")]
    parallel: Option<usize>,

    /// More log output; repeat for more.
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize gains and report bounds and passivity as JSON.
    Design,
    /// Torque transfer Bode data.
    Bode,
    /// Apparent impedance Bode data.
    Impedance,
    /// Noise amplitude spectral densities per sensor.
    Noise,
    /// Run an identification or impact protocol for every controller.
    Simulate {
        #[arg(long, value_enum)]
        protocol: Protocol,
    },
    /// Positive-real test of every apparent impedance.
    PassivityCheck,
}

pub fn run(cli: Cli) -> Result<PathBuf, CliError> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| CliError::Config("--config PATH is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let out = commands::output_dir(&cfg, cli.out.as_deref());
    cfg.output_dir = out.clone();
    let ctx = Context { cfg, out };

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.parallel {
        if n == 0 {
            return Err(CliError::Config("--parallel must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Design => commands::design(&ctx),
        Command::Bode => commands::bode_cmd(&ctx),
        Command::Impedance => commands::impedance_cmd(&ctx),
        Command::Noise => commands::noise_cmd(&ctx),
        Command::Simulate { protocol } => commands::simulate(&ctx, protocol),
        Command::PassivityCheck => commands::passivity_cmd(&ctx),
    })
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn execute<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).try_init();
    match run(cli) {
        Ok(path) => {
            println!("wrote {}", path.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
