//! Command line front end.
//!
//! Exit codes: 0 on success, 2 on configuration errors, 3 on
//! infeasible input states, 1 on anything else.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use eulastic::cli;
use eulastic::config::RunConfig;
use eulastic::Error;

#[derive(Parser)]
#[command(
    name = "eulastic",
    about = "Two-phase elastic solver with interface energy in the deformed configuration",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides output.dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed override (overrides run.seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker cap; the current implementation is single threaded and
    /// deterministic, the flag is accepted for compatibility.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the configured analytic state (energies, admissibility).
    Eval(Common),
    /// Minimize the diffuse energy; writes the iteration log and the
    /// final snapshot.
    Minimize(Common),
    /// Recovery-state sweep over the configured interface widths.
    Sweep(Common),
    /// Run the builtin characterization suite (total variation vs the
    /// geometric interface measure).
    Verify(Common),
    /// Compare analytic gradients against finite differences.
    Gradcheck(Common),
    /// Measure the symmetric difference of two deformed domains.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Second configuration.
        #[arg(long)]
        config_b: PathBuf,
    },
}

fn load_config(path: &PathBuf, common: &Common) -> Result<RunConfig, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut config = RunConfig::parse(&text)?;
    if let Some(seed) = common.seed {
        config.seed = seed;
        config.minimize.seed = seed;
    }
    if let Some(threads) = common.threads {
        if threads == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        config.threads = threads;
    }
    if let Some(out) = &common.out {
        config.out_dir = out.display().to_string();
    }
    Ok(config)
}

fn run() -> Result<(), Error> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Eval(common) => {
            let config = load_config(&common.config, common)?;
            let out = PathBuf::from(&config.out_dir);
            let warning = cli::cmd_eval(&config, &out)?;
            if warning {
                eprintln!("warning: Ciarlet-Necas check failed; see admissibility.txt");
            }
            Ok(())
        }
        Command::Minimize(common) => {
            let config = load_config(&common.config, common)?;
            let out = PathBuf::from(&config.out_dir);
            cli::cmd_minimize(&config, &out)
        }
        Command::Sweep(common) => {
            let config = load_config(&common.config, common)?;
            let out = PathBuf::from(&config.out_dir);
            cli::cmd_sweep(&config, &out)
        }
        Command::Verify(common) => {
            let config = load_config(&common.config, common)?;
            let out = PathBuf::from(&config.out_dir);
            let worst = cli::cmd_verify(&config, &out)?;
            println!("verify: worst discrepancy {worst:e}");
            Ok(())
        }
        Command::Gradcheck(common) => {
            let config = load_config(&common.config, common)?;
            let out = PathBuf::from(&config.out_dir);
            let worst = cli::cmd_gradcheck(&config, &out)?;
            println!("gradcheck: max relative error {worst:e}");
            Ok(())
        }
        Command::Compare { common, config_b } => {
            let config_a = load_config(&common.config, common)?;
            let config_bv = load_config(config_b, common)?;
            let out = PathBuf::from(&config_a.out_dir);
            let sym = cli::cmd_compare(&config_a, &config_bv, &out)?;
            println!("compare: symmetric difference {sym:e}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Config(_) | Error::InvalidArgument(_) => ExitCode::from(2),
                Error::Infeasible(_) => ExitCode::from(3),
                _ => ExitCode::from(1),
            }
        }
    }
}
