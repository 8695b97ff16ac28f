use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context as _, Result};
use clap::{Parser, Subcommand};
use mnar_cli::stages::{cmd_estimate, cmd_fit, cmd_impute, cmd_report, cmd_simulate, cmd_validate};
use mnar_cli::{Context, Outcome, Overrides, PipelineConfig, StageStatus};

#[derive(Parser)]
#[command(name = "mnar", version, about = "Smoking prevalence corrected for survey non-participation")]
struct Cli {
    /// Pipeline configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides every seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// MCMC profile.
    #[arg(long, global = true, value_parser = ["paper", "desk"])]
    profile: Option<String>,
    /// Worker threads for every parallel stage.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic cohort and its masked survey dataset.
    Simulate,
    /// Fit the smoking and survival model to participants.
    Fit {
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Impute non-participants' smoking from the posterior draws.
    Impute {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        draws: Option<PathBuf>,
    },
    /// Corrected and participant-only prevalence per cell.
    Estimate {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        imputations: Option<PathBuf>,
    },
    /// Tabulate one survey year.
    Report {
        #[arg(long)]
        trend: Option<PathBuf>,
        #[arg(long)]
        year: Option<u16>,
    },
    /// Check a dataset against the design invariants.
    Validate {
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Every stage in order.
    Run,
}

fn run(cli: Cli) -> Result<StageStatus> {
    let mut config = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Command::Report { year: Some(y), .. } = &cli.command {
        config.report.year = Some(*y);
    }
    let resolved = config.resolve(&Overrides {
        seed: cli.seed,
        profile: cli.profile.clone(),
        threads: cli.threads,
    })?;
    if let Some(n) = resolved.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let ctx = Context::new(cli.out_dir.clone(), resolved)?;
    let stage = |name: &str, f: &dyn Fn(&Context) -> Result<Outcome>| -> Result<StageStatus> {
        let o = ctx.run_stage(name, f)?;
        if let Some(m) = &o.message {
            eprintln!("{name}: {m}");
        }
        Ok(o.status)
    };
    match &cli.command {
        Command::Simulate => stage("simulate", &cmd_simulate),
        Command::Fit { dataset } => stage("fit", &|c| cmd_fit(c, dataset.as_deref())),
        Command::Impute { dataset, draws } => stage("impute", &|c| cmd_impute(c, dataset.as_deref(), draws.as_deref())),
        Command::Estimate { dataset, imputations } => {
            stage("estimate", &|c| cmd_estimate(c, dataset.as_deref(), imputations.as_deref()))
        }
        Command::Report { trend, .. } => stage("report", &|c| cmd_report(c, trend.as_deref())),
        Command::Validate { dataset } => stage("validate", &|c| cmd_validate(c, dataset.as_deref())),
        Command::Run => {
            stage("simulate", &cmd_simulate)?;
            let fit = stage("fit", &|c| cmd_fit(c, None))?;
            if fit != StageStatus::Completed && !ctx.resolved.config.impute.allow_unconverged {
                return Ok(fit);
            }
            stage("impute", &|c| cmd_impute(c, None, None))?;
            stage("estimate", &|c| cmd_estimate(c, None, None))?;
            stage("report", &|c| cmd_report(c, None))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(StageStatus::Completed) => ExitCode::SUCCESS,
        Ok(StageStatus::NotConverged) => {
            eprintln!("error: MCMC did not converge");
            ExitCode::from(2)
        }
        Ok(StageStatus::Failed) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
