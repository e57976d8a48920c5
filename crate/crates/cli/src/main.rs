//! `samplab` command-line interface.
//!
//! Exit codes: 0 success, 1 failed check or invalid configuration, 2 I/O.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use samplab::experiment::{self, ExperimentConfig, RunOptions};
use samplab::theory::{self, BatteryOptions, Fault};
use samplab::Error;

#[derive(Parser)]
#[command(name = "samplab", version, about = "Multi-armed sampling simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write one CSV row per (policy, T, run, t).
    Run(RunArgs),
    /// Run a horizon grid, write mean final regrets and print log-log slopes.
    Sweep(SweepArgs),
    /// Run the theory check battery.
    CheckTheory(CheckArgs),
}

#[derive(Args)]
struct Common {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `base_seed` from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, env = "SAMPLAB_THREADS")]
    threads: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Output CSV; overrides `output` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Aggregate CSV of mean final regrets; overrides `output`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the rate table as CSV.
    #[arg(long)]
    fits: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    Softmax,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long, default_value_t = 2024)]
    seed: u64,
    #[arg(long, env = "SAMPLAB_THREADS")]
    threads: Option<usize>,
    /// Run no checks.
    #[arg(long)]
    empty: bool,
    /// Runs per environment in the lower-bound audits.
    #[arg(long)]
    audit_runs: Option<usize>,
    /// Negative control: corrupt a component before checking it.
    #[arg(long, hide = true, value_enum)]
    inject_fault: Option<FaultArg>,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io(_) => 2,
        _ => 1,
    }
}

fn load(common: &Common) -> Result<ExperimentConfig, Error> {
    let text = std::fs::read_to_string(&common.config)?;
    let mut config = ExperimentConfig::from_json(&text)
        .map_err(|e| Error::InvalidConfig(format!("{}: {e}", common.config.display())))?;
    if let Some(seed) = common.seed {
        config.base_seed = seed;
    }
    Ok(config)
}

fn output_path(flag: Option<PathBuf>, config: &ExperimentConfig) -> Result<PathBuf, Error> {
    flag.or_else(|| config.output.clone())
        .ok_or_else(|| Error::InvalidConfig("no output path: pass --out or set `output`".into()))
}

fn create(path: &Path) -> Result<BufWriter<File>, Error> {
    Ok(BufWriter::new(File::create(path)?))
}

fn cmd_run(args: RunArgs) -> Result<(), Error> {
    let config = load(&args.common)?;
    let out = output_path(args.out, &config)?;
    let mut w = create(&out)?;
    experiment::run(
        &config,
        RunOptions {
            threads: args.common.threads,
        },
        &mut w,
    )?;
    w.flush()?;
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<(), Error> {
    let config = load(&args.common)?;
    let out = output_path(args.out, &config)?;
    let res = experiment::sweep(
        &config,
        RunOptions {
            threads: args.common.threads,
        },
    )?;
    let mut w = create(&out)?;
    experiment::write_sweep_points(&config, &res, &mut w)?;
    w.flush()?;
    if let Some(path) = args.fits {
        let mut w = create(&path)?;
        experiment::write_rate_fits(&res, &mut w)?;
        w.flush()?;
    }
    let stdout = std::io::stdout();
    let mut s = stdout.lock();
    for (policy, metric, fit) in &res.fits {
        match fit {
            Some(f) => writeln!(
                s,
                "{policy} {metric} slope={:.4} r2={:.4} points={}",
                f.slope,
                f.r_squared,
                f.horizons.len()
            )?,
            None => writeln!(s, "{policy} {metric} slope=skipped")?,
        }
    }
    Ok(())
}

fn cmd_check(args: CheckArgs) -> Result<bool, Error> {
    let options = BatteryOptions {
        empty: args.empty,
        fault: args.inject_fault.map(|FaultArg::Softmax| Fault::Softmax),
        audit_runs: args.audit_runs,
    };
    let reports = match args.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?
            .install(|| theory::run_battery(args.seed, &options))?,
        None => theory::run_battery(args.seed, &options)?,
    };
    let stdout = std::io::stdout();
    let mut s = stdout.lock();
    for r in &reports {
        writeln!(s, "{r}")?;
    }
    let failed = reports.iter().filter(|r| !r.passed).count();
    writeln!(s, "{} checks, {failed} failed", reports.len())?;
    Ok(failed == 0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a).map(|_| true),
        Command::Sweep(a) => cmd_sweep(a).map(|_| true),
        Command::CheckTheory(a) => cmd_check(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("samplab: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
