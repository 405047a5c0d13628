// `!(x > 0.0)` guards deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

mod breakdown;
mod config;
mod fit_iv;
mod manifest;
mod plot;
mod report;
mod stem;
mod sweep;

use manifest::{Outputs, RunManifest};

/// Tunnel-junction barrier analysis.
#[derive(Debug, Parser)]
#[command(name = "jjbarrier", version, about)]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, env = "JJBARRIER_OUT", default_value = "jjbarrier-out")]
    out_dir: PathBuf,

    /// TOML file with one table per command ([fit_iv], [sweep], ...).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// More log output; repeat for debug.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit low-bias resistance, Simmons parameters and breakdown per junction.
    FitIv(fit_iv::Args),
    /// Monte-Carlo sweep over thickness mean and sd.
    Sweep(sweep::Args),
    /// Thinnest-point breakdown statistics (simulated) or breakdown analysis of IV data.
    Breakdown(breakdown::Args),
    /// STEM-EDS forward simulation and edge analysis.
    #[command(subcommand)]
    Stem(StemCommand),
    /// Semi-spatial wafer maps from a records table.
    Report(report::Args),
    /// Re-run a command from its manifest and compare output digests.
    Replay { manifest: PathBuf },
}

#[derive(Debug, Subcommand)]
enum StemCommand {
    /// Topography -> lamella -> projection -> noise and blur.
    Simulate(stem::SimulateArgs),
    /// Kernel edge detection over several asymmetry factors.
    Analyze(stem::AnalyzeArgs),
}

fn run_command(name: &str, config: &serde_json::Value, out: &mut Outputs) -> Result<()> {
    match name {
        "fit-iv" => fit_iv::run(&serde_json::from_value(config.clone())?, out),
        "sweep" => sweep::run(&serde_json::from_value(config.clone())?, out),
        "breakdown" => breakdown::run(&serde_json::from_value(config.clone())?, out),
        "stem simulate" => stem::run_simulate(&serde_json::from_value(config.clone())?, out),
        "stem analyze" => stem::run_analyze(&serde_json::from_value(config.clone())?, out),
        "report" => report::run(&serde_json::from_value(config.clone())?, out),
        other => bail!("unknown command '{other}'"),
    }
}

fn resolve(cli: &Cli, file: Option<&toml::Table>) -> Result<(&'static str, serde_json::Value)> {
    Ok(match &cli.command {
        Command::FitIv(a) => ("fit-iv", config::resolve::<fit_iv::Config, _>(file, "fit_iv", a)?),
        Command::Sweep(a) => ("sweep", config::resolve::<sweep::Config, _>(file, "sweep", a)?),
        Command::Breakdown(a) => (
            "breakdown",
            config::resolve::<breakdown::Config, _>(file, "breakdown", a)?,
        ),
        Command::Stem(StemCommand::Simulate(a)) => (
            "stem simulate",
            config::resolve::<stem::SimulateConfig, _>(file, "stem_simulate", a)?,
        ),
        Command::Stem(StemCommand::Analyze(a)) => (
            "stem analyze",
            config::resolve::<stem::AnalyzeConfig, _>(file, "stem_analyze", a)?,
        ),
        Command::Report(a) => ("report", config::resolve::<report::Config, _>(file, "report", a)?),
        Command::Replay { .. } => unreachable!(),
    })
}

fn execute(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker threads")?;
    }
    std::fs::create_dir_all(&cli.out_dir).with_context(|| format!("creating {}", cli.out_dir.display()))?;

    if let Command::Replay { manifest } = &cli.command {
        let recorded = RunManifest::read(manifest)?;
        recorded.check_inputs()?;
        let mut out = Outputs::new(&cli.out_dir);
        run_command(&recorded.command, &recorded.config, &mut out)?;
        let replayed = RunManifest::new(&recorded.command, recorded.config.clone(), &out)?;
        replayed.write(&cli.out_dir)?;
        let diffs = recorded.output_differences(&replayed);
        if !diffs.is_empty() {
            bail!("replay differs from the recorded run in: {}", diffs.join(", "));
        }
        log::info!("replay reproduced {} outputs byte-identically", replayed.outputs.len());
        return Ok(());
    }

    let file = match &cli.config {
        Some(p) => Some(config::load(p)?),
        None => None,
    };
    let (name, resolved) = resolve(&cli, file.as_ref())?;
    let mut out = Outputs::new(&cli.out_dir);
    run_command(name, &resolved, &mut out)?;
    RunManifest::new(name, resolved, &out)?.write(&cli.out_dir)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "info",
        1 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::FAILURE
        }
    }
}
