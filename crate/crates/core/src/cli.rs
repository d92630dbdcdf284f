//! Command-line front end. Exit codes: 0 success, 2 usage or configuration,
//! 3 data or I/O, 4 numerical failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::StudyConfig;
use crate::dataset::Grouping;
use crate::error::{Error, Result};
use crate::estimators::{CifModel, FittedModel, ModelKind};
use crate::io::{self, SplitInfo};
use crate::pipeline::{self, StudyReport};

#[derive(Debug, Parser)]
#[command(name = "crstudy", version, about = "Competing-risks bias and fairness-gap study runner")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate `data_{k}.csv` and `truth_{k}.csv` for every replication.
    Simulate(RunArgs),
    /// Fit one model on the development portion of a dataset.
    Fit(FitArgs),
    /// Empirical vs theoretical discrepancy of two models on held-out subjects.
    Discrepancy(DiscrepancyArgs),
    /// Time-dependent Brier score and concordance, overall and per group.
    Evaluate(EvaluateArgs),
    /// Treatment-threshold cross-tabulation for two models.
    Decide(DecideArgs),
    /// Pool `discrepancy_{k}.json` files of a directory into the RMSE table.
    Report(ReportArgs),
    /// Run simulate, fit, discrepancy, evaluate, decide and report for every replication.
    Study(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub replications: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Quantile levels of the held-out event times, e.g. `0.5,1`.
    #[arg(long, value_delimiter = ',')]
    pub horizons: Option<Vec<f64>>,
    #[arg(long)]
    pub cause: Option<u8>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub group: Option<String>,
}

fn parse_model(s: &str) -> std::result::Result<ModelKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_grouping(s: &str) -> std::result::Result<Grouping, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Args)]
pub struct FitArgs {
    pub data: PathBuf,
    /// One of cox, finegray, km, aj.
    #[arg(long, value_parser = parse_model)]
    pub model: ModelKind,
    #[arg(long, default_value_t = 1)]
    pub cause: u8,
    /// Seed of the development/test split.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.8)]
    pub dev_fraction: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ModelPair {
    /// Model that accounts for competing events.
    #[arg(long)]
    pub competing: PathBuf,
    /// Model that treats competing events as censoring.
    #[arg(long)]
    pub naive: PathBuf,
}

#[derive(Debug, Args)]
pub struct DiscrepancyArgs {
    /// Dataset with truth columns.
    #[arg(long)]
    pub truth: PathBuf,
    #[command(flatten)]
    pub models: ModelPair,
    #[arg(long, value_delimiter = ',', default_values_t = [0.5, 1.0])]
    pub horizons: Vec<f64>,
    /// Replication index used to name the output files.
    #[arg(long, default_value_t = 0)]
    pub replication: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub models: ModelPair,
    #[arg(long, value_delimiter = ',', default_values_t = [0.5, 1.0])]
    pub horizons: Vec<f64>,
    /// `group` or a binary covariate column `x<k>`.
    #[arg(long, default_value = "group", value_parser = parse_grouping)]
    pub group: Grouping,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DecideArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub models: ModelPair,
    #[arg(long, default_value_t = 0.10)]
    pub threshold: f64,
    /// Quantile level of the held-out event times used as decision horizon.
    #[arg(long, default_value_t = 1.0)]
    pub horizons: f64,
    #[arg(long, default_value = "group", value_parser = parse_grouping)]
    pub group: Grouping,
    /// Covariate index holding age; omitted means everyone is eligible.
    #[arg(long)]
    pub age_covariate: Option<usize>,
    #[arg(long, default_value_t = 40.0)]
    pub min_age: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    pub dir: PathBuf,
    /// Bootstrap seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        e if e.is_numerical() => 4,
        Error::Config(_) | Error::UnknownModelKind(_) => 2,
        _ => 3,
    }
}

fn study_config(args: &RunArgs) -> Result<StudyConfig> {
    let mut config = match &args.config {
        Some(p) => StudyConfig::load(p)?,
        None => StudyConfig::default(),
    };
    if let Some(s) = args.seed {
        config.sim.seed = s;
    }
    if let Some(r) = args.replications {
        config.sim.replications = r;
    }
    if let Some(n) = args.n {
        config.sim.n = n;
    }
    if let Some(h) = &args.horizons {
        config.study.horizons = h.clone();
    }
    if let Some(c) = args.cause {
        config.study.cause = c;
    }
    if let Some(t) = args.threshold {
        config.policy.threshold = t;
    }
    if let Some(g) = &args.group {
        g.parse::<Grouping>().map_err(|e| Error::Config(e.to_string()))?;
        config.study.group = g.clone();
    }
    if args.jobs.is_some() {
        config.study.jobs = args.jobs;
    }
    config.validate()?;
    Ok(config)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn load_pair(models: &ModelPair) -> Result<(FittedModel, FittedModel, Option<SplitInfo>)> {
    let c = io::load_model(&models.competing)?;
    let nc = io::load_model(&models.naive)?;
    let split = pipeline::common_split(c.split, nc.split)?;
    if c.model.cause() != nc.model.cause() {
        return Err(Error::InvalidInput("models target different causes".into()));
    }
    Ok((c.model, nc.model, split))
}

fn print_report(report: &StudyReport) {
    println!(
        "{:<10} {:>12} {:>12} {:>10} {:>10}",
        "horizon", "RMSE(L)", "RMSE(gap)", "slope L", "slope gap"
    );
    for h in &report.horizons {
        let s = &h.summary;
        let slope = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"));
        println!(
            "{:<10} {:>5.3}±{:<6.3} {:>5.3}±{:<6.3} {:>10} {:>10}",
            h.label,
            s.rmse_l.rmse,
            s.rmse_l.bootstrap_sd,
            s.rmse_gap.rmse,
            s.rmse_gap.bootstrap_sd,
            slope(s.slope_l),
            slope(s.slope_gap)
        );
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(args) => {
            let config = study_config(&args)?;
            let jobs = config.study.jobs.unwrap_or_else(pipeline::default_jobs);
            pipeline::simulate_study(&config, &args.out, jobs)?;
            println!("wrote {} replications to {}", config.sim.replications, args.out.display());
        }
        Command::Study(args) => {
            let config = study_config(&args)?;
            let jobs = config.study.jobs.unwrap_or_else(pipeline::default_jobs);
            let outcome = pipeline::run_study(&config, &args.out, jobs)?;
            print_report(&outcome.report);
        }
        Command::Fit(args) => {
            if !(args.dev_fraction > 0.0 && args.dev_fraction <= 1.0) {
                return Err(Error::Config("--dev-fraction must lie in (0, 1]".into()));
            }
            let data = io::load_dataset(&args.data, None)?;
            let split = (args.dev_fraction < 1.0).then_some(SplitInfo {
                seed: args.seed,
                dev_fraction: args.dev_fraction,
            });
            let model = match split {
                Some(s) => pipeline::fit_step(&data, args.model, args.cause, s)?,
                None => FittedModel::fit(args.model, &data, args.cause)?,
            };
            io::save_model(&model, split, &args.out)?;
            if let Some(d) = model.diagnostics() {
                println!("{}: converged in {} iterations", args.model, d.iterations);
                for w in &d.warnings {
                    eprintln!("warning: {w}");
                }
            }
        }
        Command::Discrepancy(args) => {
            let (c, nc, split) = load_pair(&args.models)?;
            let data = io::load_dataset(&args.truth, None)?;
            let truth = io::load_truth(&args.truth)?;
            let (test, idx) = pipeline::held_out(&data, split)?;
            let test_truth: Vec<_> = idx.iter().map(|&i| truth[i].clone()).collect();
            let report = pipeline::discrepancy_step(&c, &nc, &test, &test_truth, &args.horizons, args.replication)?;
            create_dir(&args.out)?;
            pipeline::write_discrepancy(&args.out, &report)?;
            for h in &report.horizons {
                println!(
                    "{} (t = {:.6}): empirical L {:.4}, theoretical L {:.4}",
                    h.horizon.label, h.horizon.t, h.empirical_mean, h.theoretical_mean
                );
            }
        }
        Command::Evaluate(args) => {
            let (c, nc, split) = load_pair(&args.models)?;
            let data = io::load_dataset(&args.data, None)?;
            let (test, _) = pipeline::held_out(&data, split)?;
            let reports = pipeline::evaluation_step(&c, &nc, &test, &args.horizons, args.group)?;
            create_dir(&args.out)?;
            pipeline::write_evaluation(&args.out, &reports, None)?;
        }
        Command::Decide(args) => {
            let (c, nc, split) = load_pair(&args.models)?;
            let data = io::load_dataset(&args.data, None)?;
            let (test, _) = pipeline::held_out(&data, split)?;
            let policy = crate::config::PolicySettings {
                threshold: args.threshold,
                horizon: args.horizons,
                age_covariate: args.age_covariate,
                min_age: args.min_age,
            };
            let report = pipeline::decision_step(&c, &nc, &test, &policy, args.group)?;
            create_dir(&args.out)?;
            pipeline::write_decision(&args.out, &report, None)?;
            let all = &report.strata[0];
            println!(
                "overtreatment: competing {:.4}, naive {:.4}",
                all.competing.overtreatment, all.non_competing.overtreatment
            );
        }
        Command::Report(args) => {
            let report = pipeline::report_dir(&args.dir, args.seed)?;
            print_report(&report);
        }
    }
    Ok(())
}

pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
