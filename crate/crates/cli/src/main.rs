use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use backlash_core::experiment::{self, preset, table2_presets, ExperimentConfig, Outcome, Overrides, RunReport};
use backlash_core::Error;
use clap::{Args, Parser, Subcommand};

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_ESTIMATION: u8 = 3;
const EXIT_CHECKS: u8 = 4;

/// Backlash identification experiments on a simulated two-mass drive.
#[derive(Parser)]
#[command(name = "backlash", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the limit-cycle conditions and evaluate the closed forms.
    Analyze(RunArgs),
    /// Simulate and write trajectory, events and report.
    Simulate(RunArgs),
    /// Simulate, then estimate the backlash gap from motor-side signals.
    Identify(RunArgs),
    /// Run the four identification cases and tabulate the estimates.
    #[command(name = "reproduce-table2")]
    ReproduceTable2(TableArgs),
}

#[derive(Args)]
struct Common {
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Subtract the limit-cycle amplitude from proposed-method readings.
    #[arg(long)]
    amplitude_correction: bool,
    /// Seed for the randomized initial phase.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the half gap β (rad).
    #[arg(long)]
    beta: Option<f64>,
}

#[derive(Args)]
struct RunArgs {
    /// Config file, or the name of a bundled preset.
    #[arg(long)]
    config: String,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct TableArgs {
    /// Directory holding paper-case1.json .. paper-case4.json; the bundled
    /// presets are used otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            beta: self.beta,
            seed: self.seed,
            amplitude_correction: self.amplitude_correction,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(
            Error::Config(_)
            | Error::InvalidParameter { .. }
            | Error::InconsistentState(_)
            | Error::SingularParameters(_),
        ) => EXIT_USAGE,
        Some(Error::EstimationFailed { .. } | Error::RankDeficient(_)) => EXIT_ESTIMATION,
        Some(Error::ConditionsViolated(_)) => EXIT_CHECKS,
        _ => EXIT_FAILURE,
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Analyze(args) => {
            let cfg = load(&args)?;
            let report = experiment::analyze(&cfg)?;
            finish_report(&out_dir(&args.common, &cfg), &report)
        }
        Command::Simulate(args) => {
            let cfg = load(&args)?;
            let run = experiment::simulate_experiment(&cfg)?;
            finish_run(&out_dir(&args.common, &cfg), &run)
        }
        Command::Identify(args) => {
            let cfg = load(&args)?;
            let run = experiment::identify_experiment(&cfg)?;
            finish_run(&out_dir(&args.common, &cfg), &run)
        }
        Command::ReproduceTable2(args) => reproduce_table2(&args),
    }
}

/// Read a config file, falling back to a bundled preset name, and apply
/// the command-line overrides. Fully validated before returning.
fn load(args: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = load_config(&args.config)?;
    cfg.apply(&args.common.overrides());
    cfg.validate()?;
    Ok(cfg)
}

fn load_config(source: &str) -> Result<ExperimentConfig> {
    let path = Path::new(source);
    if path.is_file() {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg = ExperimentConfig::from_json(&text).with_context(|| format!("in {}", path.display()))?;
        return Ok(cfg);
    }
    preset(source).map_err(|_| {
        Error::Config(format!(
            "`{source}` is neither a readable file nor a bundled preset ({})",
            experiment::preset_names().collect::<Vec<_>>().join(", ")
        ))
        .into()
    })
}

fn out_dir(common: &Common, cfg: &ExperimentConfig) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("runs").join(&cfg.name))
}

fn outcome_code(outcome: Outcome) -> u8 {
    match outcome {
        Outcome::Success => 0,
        Outcome::EstimationFailed => EXIT_ESTIMATION,
        Outcome::ChecksFailed => EXIT_CHECKS,
    }
}

fn finish_report(dir: &Path, report: &RunReport) -> Result<u8> {
    experiment::write_report(dir, report).with_context(|| format!("writing report to {}", dir.display()))?;
    print!("{}", report.to_text());
    Ok(outcome_code(report.outcome))
}

fn finish_run(dir: &Path, run: &experiment::Run) -> Result<u8> {
    experiment::write_run(dir, run).with_context(|| format!("writing artifacts to {}", dir.display()))?;
    print!("{}", run.report.to_text());
    Ok(outcome_code(run.report.outcome))
}

fn reproduce_table2(args: &TableArgs) -> Result<u8> {
    let cases = match &args.config {
        Some(dir) => (1..=4)
            .map(|i| {
                let path = dir.join(format!("paper-case{i}.json"));
                load_config(path.to_str().context("non-UTF-8 config path")?)
            })
            .collect::<Result<Vec<_>>>()?,
        None => table2_presets(),
    };
    let out = args
        .common
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("runs").join("table2"));
    let (table, _) = experiment::reproduce_table2(&cases, &args.common.overrides(), Some(&out))?;
    print!("{}", table.to_text());
    Ok(if table.all_succeeded() { 0 } else { EXIT_ESTIMATION })
}
