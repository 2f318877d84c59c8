//! Stage driver for the noisy Mackey-Glass LSTM experiment. Thin wrapper
//! over the library's `experiment` module: every subcommand loads a config
//! (file or preset), runs one stage, and reports what was done or skipped.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mg_lstm::experiment::{alpha_from_files, ExperimentConfig, Pipeline, RunReport};

#[derive(Parser)]
#[command(
    name = "mglstm",
    about = "Train LSTMs on noisy Mackey-Glass data and measure how noise shifts them toward autonomous dynamics",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment config (TOML). Mutually exclusive with --preset.
    #[arg(long, global = true, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in config: desk (N=32, minutes) or paper (N=128, hours).
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Override the config's output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig, mg_lstm::Error> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, Some(name)) => ExperimentConfig::preset(name).ok_or_else(|| {
                mg_lstm::Error::InvalidConfig(format!(
                    "unknown preset `{name}` (expected desk or paper)"
                ))
            })?,
            (None, None) => ExperimentConfig::desk(),
        };
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage in order: generate, train, evaluate, sweep, alpha,
    /// impulse, report.
    Run(ConfigArgs),
    /// Integrate the equation and write the clean and noisy series.
    Generate(ConfigArgs),
    /// Train one model per noise level (or one with --sigma).
    Train(StageWithSigma),
    /// Sequential prediction of each model on fresh noisy data.
    Evaluate(StageWithSigma),
    /// NRMSE matrix over train-noise x eval-noise, plus the zeroth-order
    /// baseline.
    Sweep(ConfigArgs),
    /// Contribution ratio per model; or a single row with --model/--input.
    Alpha(AlphaArgs),
    /// Periodic-impulse experiment per model.
    Impulse(StageWithSigma),
    /// Concatenate the result tables into results/report.md.
    Report(ConfigArgs),
}

#[derive(Args)]
struct StageWithSigma {
    #[command(flatten)]
    config: ConfigArgs,
    /// Restrict the stage to one noise level from the configured sweep.
    #[arg(long)]
    sigma: Option<f64>,
}

#[derive(Args)]
struct AlphaArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Model file to analyze directly (outside the pipeline).
    #[arg(long, requires = "input")]
    model: Option<PathBuf>,
    /// Series CSV (t,mu,y) whose y column feeds the model.
    #[arg(long, requires = "model")]
    input: Option<PathBuf>,
}

fn print_report(report: &RunReport) {
    for line in report.summary_lines() {
        println!("{line}");
    }
}

fn run() -> Result<(), mg_lstm::Error> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => {
            let cfg = args.resolve()?;
            let report = mg_lstm::run_pipeline(&cfg)?;
            print_report(&report);
            println!("output directory: {}", cfg.output_dir.display());
        }
        Command::Generate(args) => print_report(&Pipeline::new(&args.resolve()?)?.generate()?),
        Command::Train(args) => {
            print_report(&Pipeline::new(&args.config.resolve()?)?.train(args.sigma)?)
        }
        Command::Evaluate(args) => {
            print_report(&Pipeline::new(&args.config.resolve()?)?.evaluate(args.sigma)?)
        }
        Command::Sweep(args) => print_report(&Pipeline::new(&args.resolve()?)?.sweep()?),
        Command::Alpha(args) => match (&args.model, &args.input) {
            (Some(model), Some(input)) => {
                let (train_sigma, result) = alpha_from_files(model, input)?;
                println!("sigma,alpha,ratio,skipped_terms");
                println!(
                    "{},{},{},{}",
                    train_sigma, result.alpha, result.ratio, result.skipped
                );
            }
            _ => print_report(&Pipeline::new(&args.config.resolve()?)?.alpha()?),
        },
        Command::Impulse(args) => {
            print_report(&Pipeline::new(&args.config.resolve()?)?.impulse(args.sigma)?)
        }
        Command::Report(args) => print_report(&Pipeline::new(&args.resolve()?)?.report()?),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error[{}]: {err}", err.class());
            ExitCode::FAILURE
        }
    }
}
