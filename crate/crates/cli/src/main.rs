//! Command-line front end: evaluate the product fractional integral,
//! compute bump characteristics, measure per-cone decay profiles, and run
//! the verification suite.
//!
//! Exit codes: 0 success, 1 check failure, 2 configuration or input error,
//! 3 resource guard.

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{FilterSpec, ProfileSpec, RunConfig};
use run::{cmd_characteristic, cmd_cone_decay, cmd_eval, cmd_verify, ensure_out_dir, Ctx};

#[derive(Parser)]
#[command(
    name = "strongfrac",
    about = "Strong fractional integration, cone decomposition, and two-weight bump characteristics at desk scale",
    version
)]
struct Cli {
    /// JSON run configuration; flags override file fields, which override
    /// the built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for reports (default: out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Override the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for operator sweeps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Apply the product fractional integral to the configured function and
    /// write the output field.
    Eval {
        /// Also run the direct quadruple-sum oracle and record the
        /// discrepancy.
        #[arg(long)]
        oracle: bool,
    },
    /// Compute the bump characteristic supremum over a rectangle family.
    Characteristic {
        /// Family: all, diagonal, or ecc:<l>.
        #[arg(long)]
        filter: Option<String>,
        /// Write the per-rectangle value table as CSV.
        #[arg(long)]
        table: bool,
    },
    /// Per-eccentricity decay profiles and the fitted decay rate.
    ConeDecay {
        /// Profile: characteristic, norm, or synthetic.
        #[arg(long)]
        profile: Option<String>,
    },
    /// Run the verification suite and write a summary.
    Verify {
        /// Print the check inventory without running anything.
        #[arg(long)]
        list: bool,
    },
}

fn load_config(path: &Option<PathBuf>) -> Result<RunConfig, String> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| format!("cannot read config {}: {e}", p.display()))?;
            serde_json::from_str(&text).map_err(|e| format!("invalid config: {e}"))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let mut config = match load_config(&cli.config) {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("warning: thread pool already initialized: {e}");
        }
    }

    // flag overrides on top of the config file
    let command_name: &'static str = match &cli.command {
        Command::Eval { oracle } => {
            config.oracle |= oracle;
            "eval"
        }
        Command::Characteristic { filter, table } => {
            config.table |= table;
            if let Some(raw) = filter {
                match FilterSpec::parse_flag(raw) {
                    Ok(f) => config.filter = f,
                    Err(msg) => {
                        eprintln!("error: {msg}");
                        return ExitCode::from(2);
                    }
                }
            }
            "characteristic"
        }
        Command::ConeDecay { profile } => {
            if let Some(raw) = profile {
                match ProfileSpec::parse_flag(raw) {
                    Ok(p) => config.profile = p,
                    Err(msg) => {
                        eprintln!("error: {msg}");
                        return ExitCode::from(2);
                    }
                }
            }
            "cone-decay"
        }
        Command::Verify { .. } => "verify",
    };

    let ctx = Ctx {
        out_dir: cli.out.clone().unwrap_or_else(|| PathBuf::from("out")),
        command: command_name,
        threads: cli.threads,
        config,
    };
    if let Err(e) = ensure_out_dir(&ctx.out_dir) {
        eprintln!("error: cannot create output directory: {e}");
        return ExitCode::from(2);
    }

    let outcome = match &cli.command {
        Command::Eval { .. } => cmd_eval(&ctx),
        Command::Characteristic { .. } => cmd_characteristic(&ctx),
        Command::ConeDecay { .. } => cmd_cone_decay(&ctx, ctx.config.profile),
        Command::Verify { list } => cmd_verify(&ctx, *list),
    };

    match outcome {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(run::exit_code(&e) as u8)
        }
    }
}
