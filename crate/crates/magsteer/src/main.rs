//! Command-line front end for the scenario runner.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use magsteer::scenario::{self, RunSummary};
use magsteer::Error;

#[derive(Parser)]
#[command(
    name = "magsteer",
    version,
    about = "Magnetization dynamics on a 1D segment: simulation, feedback steering, \
             hysteresis sweeps, and spectral/lemma verification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario configuration file (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: the config's [output].directory, then `out`)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override a config key, e.g. --override integrator.dt=5e-4 (repeatable)
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Run even when dt exceeds the mesh stability heuristic
    #[arg(long)]
    allow_large_dt: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate an uncontrolled run
    Simulate(RunArgs),
    /// Integrate a feedback-controlled run (one target, or a target sequence)
    Steer(RunArgs),
    /// Sweep input-output loops over decreasing forcing frequencies
    Hysteresis(RunArgs),
    /// Compare analytic and discrete eigenvalues about a constant state
    Spectrum(RunArgs),
    /// Run the lemma property sweeps and consistency checks
    Verify(RunArgs),
    /// Re-run the configuration embedded in a run manifest
    ReplayManifest {
        /// Manifest file written by a previous run
        manifest: PathBuf,
        /// Output directory (default: the embedded config's choice)
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version are not failures; argument errors use
            // the documented validation exit code.
            let code = if e.use_stderr() { scenario::EXIT_VALIDATION } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    std::process::exit(run(cli));
}

fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Simulate(args) => run_kind("simulate", &args),
        Command::Steer(args) => run_kind("steer", &args),
        Command::Hysteresis(args) => run_kind("hysteresis", &args),
        Command::Spectrum(args) => run_kind("spectrum", &args),
        Command::Verify(args) => run_kind("verify", &args),
        Command::ReplayManifest { manifest, out } => replay(&manifest, out.as_deref()),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            scenario::exit_code_for(&e)
        }
    }
}

fn summary_exit(summary: &RunSummary) -> i32 {
    if let Some(report) = &summary.report {
        print!("{report}");
    }
    if !summary.completed {
        eprintln!(
            "run truncated: {}",
            summary.blow_up.as_deref().unwrap_or("numerical failure")
        );
        return scenario::EXIT_NUMERICAL;
    }
    if summary.verify_passed == Some(false) {
        eprintln!("verification failed; see the report above");
        return scenario::EXIT_NUMERICAL;
    }
    log::info!(
        "done in {:.3} s; outputs: {}",
        summary.wall_time_seconds,
        summary.outputs.join(", ")
    );
    0
}

fn run_kind(subcommand: &str, args: &RunArgs) -> magsteer::Result<i32> {
    let config = scenario::load_config(&args.config, &args.overrides)?;
    let resolved = scenario::resolve(&config, args.allow_large_dt)?;
    if resolved.kind.subcommand() != subcommand {
        return Err(Error::Config(format!(
            "config kind `{}` must run under the `{}` subcommand, not `{subcommand}`",
            resolved.kind,
            resolved.kind.subcommand()
        )));
    }
    for w in &resolved.warnings {
        log::warn!("{w}");
    }
    let out_dir: PathBuf = args
        .out
        .clone()
        .or_else(|| config.output_directory().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let summary = scenario::run_scenario(&resolved, &out_dir)?;
    Ok(summary_exit(&summary))
}

fn replay(manifest: &Path, out: Option<&Path>) -> magsteer::Result<i32> {
    let (resolved, summary) = scenario::replay_manifest(manifest, out)?;
    for w in &resolved.warnings {
        log::warn!("{w}");
    }
    Ok(summary_exit(&summary))
}
