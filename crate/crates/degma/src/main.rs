use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use degma::config::{ExperimentConfig, ExperimentKind, Payload};
use degma::plot::{plot, PlotKind};
use degma::{run, Error, RunOptions, RunRecord};
use degma_core::barriers::Suite;

#[derive(Parser)]
#[command(name = "degma", version, about = "Degenerate Monge-Ampere experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON experiment config; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Root of the output tree.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for independent ladder levels.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Dirichlet problem det D²u = g·d^α.
    Solve(Common),
    /// Degenerate linear model problem and tangent profile fits.
    Grushin(Common),
    /// Monge-Ampère eigenvalue on a disk.
    Eigen(Common),
    /// Hodograph and partial Legendre transforms of the eigenfunction.
    Pipeline(Common),
    /// Normal exponent and boundary expansion fits.
    Fit(Common),
    /// Barrier and matrix inequality property suites.
    Barriers {
        #[command(subcommand)]
        action: BarrierAction,
    },
    /// Comparison constants of the quasi-distance d_α.
    MetricScan(Common),
    /// Renders a CSV table as SVG.
    Plot {
        csv: PathBuf,
        #[arg(long, value_enum)]
        kind: PlotKind,
        /// Defaults to the CSV path with an `.svg` extension.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum BarrierAction {
    Verify {
        #[arg(long, default_value = "all")]
        suite: String,
        #[command(flatten)]
        common: Common,
    },
}

fn load(kind: ExperimentKind, common: &Common) -> Result<ExperimentConfig, Error> {
    let mut config = match &common.config {
        Some(path) => ExperimentConfig::from_path(path)?,
        None => ExperimentConfig::new(kind),
    };
    if config.kind != kind {
        return Err(Error::Config {
            pointer: "/kind".into(),
            message: format!(
                "`{}` config passed to the `{}` command",
                config.kind.name(),
                kind.name()
            ),
        });
    }
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn execute(config: &ExperimentConfig, common: &Common) -> Result<RunRecord, Error> {
    let root = config.out.clone().unwrap_or_else(|| common.out.clone());
    run(config, &RunOptions::new(root, common.threads))
}

fn report(record: &RunRecord) -> Result<(), Error> {
    println!("{}", serde_json::to_string_pretty(&record.summary)?);
    eprintln!("wrote {}", record.dir.display());
    Ok(())
}

fn main_inner(cli: Cli) -> Result<bool, Error> {
    let (kind, common) = match cli.command {
        Command::Solve(c) => (ExperimentKind::MaSolve, c),
        Command::Grushin(c) => (ExperimentKind::Grushin, c),
        Command::Eigen(c) => (ExperimentKind::Eigen, c),
        Command::Pipeline(c) => (ExperimentKind::Pipeline, c),
        Command::Fit(c) => (ExperimentKind::ExpansionFit, c),
        Command::MetricScan(c) => (ExperimentKind::MetricScan, c),
        Command::Plot { csv, kind, out } => {
            let svg = out.unwrap_or_else(|| csv.with_extension("svg"));
            plot(&csv, kind, &svg)?;
            eprintln!("wrote {}", svg.display());
            return Ok(true);
        }
        Command::Barriers {
            action: BarrierAction::Verify { suite, common },
        } => {
            let mut config = load(ExperimentKind::Barriers, &common)?;
            let suite: Suite = suite
                .parse()
                .map_err(|e: degma_core::Error| Error::Config {
                    pointer: "/payload/suite".into(),
                    message: e.to_string(),
                })?;
            if let Payload::Barriers(p) = &mut config.payload {
                p.suite = suite;
            }
            let record = execute(&config, &common)?;
            let csv = std::fs::read_to_string(record.dir.join("barriers.csv")).map_err(|e| {
                Error::Io {
                    path: record.dir.join("barriers.csv"),
                    source: e,
                }
            })?;
            print!("{csv}");
            eprintln!("wrote {}", record.dir.display());
            return Ok(record.metric("failures") == Some(0.0));
        }
    };
    let config = load(kind, &common)?;
    let record = execute(&config, &common)?;
    report(&record)?;
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match main_inner(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
