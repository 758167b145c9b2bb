//! `ose` command-line front end.
//!
//! Exit codes: 0 success, 1 invalid input (usage, parse or validation),
//! 2 runtime failure. Failures print one line to stderr:
//! `error kind=<kind> message="<text>"`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ose_core::harness::{monte_carlo_compare_from, run_battery, run_trajectory_from, simulate};
use ose_core::io::{
    atomic_write, gen_system, load_config, summary_json, write_records_csv, write_simulation_csv,
    write_summary, Experiment,
};
use ose_core::quantum::FusionMode;
use ose_core::{Error, Result};

#[derive(Debug, Parser)]
#[command(
    name = "ose",
    version,
    about = "Recursive quantum state estimation toolkit"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evolve the true state and write Born probabilities per step.
    Simulate(RunArgs),
    /// Run the estimator on one seed and write per-step records.
    Estimate(RunArgs),
    /// Paired Monte Carlo study against the per-step pseudo-inverse.
    Compare(CompareArgs),
    /// Write a random system (Haar propagator, projective measurement).
    GenSystem(GenArgs),
    /// Parse and validate a configuration without running it.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output CSV; defaults to `run.records_csv` from the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Defaults to `run.seed_base`.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Append true and estimated amplitudes to every row.
    #[arg(long)]
    pub log_states: bool,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Number of seeds; seed i is `seed_base + i`.
    #[arg(long)]
    pub seeds: Option<usize>,
    /// Overrides `run.seed_base`.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Summary JSON; defaults to `run.summary`, else stdout.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub dim: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Isotropic measurement-noise level; 0 gives a noiseless system.
    #[arg(long, default_value_t = 0.0)]
    pub sigma_r: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub config: PathBuf,
}

/// Maps an error to the process exit code.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Parse(_) | Error::Validation { .. } => 1,
        _ => 2,
    }
}

/// One-line diagnostic. Quotes, backslashes and newlines in the message are
/// escaped so the line stays parseable.
pub fn diagnostic(kind: &str, message: &str) -> String {
    let mut escaped = String::with_capacity(message.len());
    for ch in message.chars() {
        match ch {
            '"' => escaped.push_str("\\\""),
            '\\' => escaped.push_str("\\\\"),
            '\n' => escaped.push_str("\\n"),
            '\r' => escaped.push_str("\\r"),
            c => escaped.push(c),
        }
    }
    format!("error kind={kind} message=\"{escaped}\"")
}

pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            eprintln!(
                "{}",
                diagnostic("usage", first.trim_start_matches("error: "))
            );
            return 1;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", diagnostic(e.kind(), &e.to_string()));
            exit_code(&e)
        }
    }
}

fn load(path: &Path) -> Result<Experiment> {
    load_config(path)
        .map_err(|e| match e {
            Error::Io(io) => Error::Validation {
                field: "--config".into(),
                reason: format!("{}: {io}", path.display()),
            },
            other => other,
        })?
        .build()
}

fn output_path(flag: Option<PathBuf>, configured: Option<&String>, what: &str) -> Result<PathBuf> {
    flag.or_else(|| configured.map(PathBuf::from))
        .ok_or_else(|| Error::Validation {
            field: what.into(),
            reason: "no output path given on the command line or in the config".into(),
        })
}

/// `records.csv` with label `a0` becomes `records_a0.csv`.
fn channel_path(base: &Path, label: &str) -> PathBuf {
    let stem = base
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("records");
    let name = match base.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}_{label}.{ext}"),
        None => format!("{stem}_{label}"),
    };
    base.with_file_name(name)
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Validate(args) => {
            load(&args.config)?;
            println!("ok {}", args.config.display());
            Ok(())
        }
        Command::GenSystem(args) => {
            let config = gen_system(args.dim, args.seed, args.sigma_r)?;
            atomic_write(&args.out, config.to_toml()?.as_bytes())
        }
        Command::Simulate(args) => {
            let exp = load(&args.config)?;
            let out = output_path(args.out, exp.run.records_csv.as_ref(), "--out")?;
            let steps = args.steps.unwrap_or(exp.run.steps);
            let records = simulate(&exp.system, steps, args.seed.unwrap_or(exp.run.seed_base))?;
            let labels: Vec<&str> = exp
                .system
                .measurement()
                .operators()
                .iter()
                .map(|m| m.label.as_str())
                .collect();
            write_simulation_csv(&records, &labels, &out)
        }
        Command::Estimate(args) => {
            let exp = load(&args.config)?;
            let out = output_path(args.out, exp.run.records_csv.as_ref(), "--out")?;
            let steps = args.steps.unwrap_or(exp.run.steps);
            let seed = args.seed.unwrap_or(exp.run.seed_base);
            let log_states = args.log_states || exp.run.log_states;
            let x0 = exp.initial_estimate.as_ref();
            match exp.system.measurement().mode() {
                FusionMode::Stacked => {
                    let records =
                        run_trajectory_from(&exp.system, &exp.estimator, x0, steps, seed)?;
                    write_records_csv(&records, &out, log_states)?;
                }
                FusionMode::Battery => {
                    // Compute every stream before writing any file.
                    let streams = run_battery(&exp.system, &exp.estimator, x0, steps, seed)?;
                    for (label, records) in &streams {
                        write_records_csv(records, &channel_path(&out, label), log_states)?;
                    }
                }
            }
            Ok(())
        }
        Command::Compare(args) => {
            let exp = load(&args.config)?;
            if exp.system.measurement().mode() != FusionMode::Stacked {
                return Err(Error::BadConfig(
                    "compare pairs one joint estimate with the pseudo-inverse; it needs mode = \"stacked\"".into(),
                ));
            }
            let summary = monte_carlo_compare_from(
                &exp.system,
                &exp.estimator,
                exp.initial_estimate.as_ref(),
                args.seeds.unwrap_or(exp.run.n_seeds),
                args.steps.unwrap_or(exp.run.steps),
                args.seed.unwrap_or(exp.run.seed_base),
            )?;
            match args
                .summary
                .or_else(|| exp.run.summary.as_ref().map(PathBuf::from))
            {
                Some(path) => write_summary(&summary, &path).map(|_| ()),
                None => {
                    println!("{}", summary_json(&summary)?);
                    Ok(())
                }
            }
        }
    }
}
