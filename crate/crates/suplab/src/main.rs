//! Thin command-line front end over the library: each subcommand loads a
//! TOML experiment config, runs the grid, and writes CSV/SVG artifacts.
//! Exit codes: 0 success, 2 config, 3 data/format/retrieval, 4 numeric.

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use suplab::harness::{
    read_result_csv, run_experiment, write_outputs, ExperimentConfig, ExperimentKind,
    OutputFormat, PlotKind,
};
use suplab::{Error, Result};

#[derive(Parser)]
#[command(name = "suplab", version, about = "Sparse-concept superposition laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to the config's out_dir, then ./out.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
    /// Artifacts to write: csv, svg, or both.
    #[arg(long, default_value = "both")]
    format: String,
}

#[derive(Subcommand)]
enum Command {
    /// Synthetic-world studies: interference, ttt-rate, neighborhood-sweep,
    /// assumption-report.
    Simulate(RunArgs),
    /// Autoencoder studies: sae-train, sae-mask.
    Sae(RunArgs),
    /// Dataset classifiers: model-scaling, data-scaling, moe-scaling.
    Classify(RunArgs),
    /// Re-render plots from a result CSV.
    Report {
        /// Result table written by a previous run.
        #[arg(long)]
        csv: PathBuf,
        /// Plot style: line, band, or hist.
        #[arg(long, default_value = "band")]
        kind: String,
        /// Output SVG path; defaults to the CSV path with an .svg extension.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(args) => run_grid(
            args,
            "simulate",
            &[
                ExperimentKind::Interference,
                ExperimentKind::TttRate,
                ExperimentKind::NeighborhoodSweep,
                ExperimentKind::AssumptionReport,
            ],
        ),
        Command::Sae(args) => {
            run_grid(args, "sae", &[ExperimentKind::SaeTrain, ExperimentKind::SaeMask])
        }
        Command::Classify(args) => run_grid(
            args,
            "classify",
            &[
                ExperimentKind::ModelScaling,
                ExperimentKind::DataScaling,
                ExperimentKind::MoeScaling,
            ],
        ),
        Command::Report { csv, kind, out } => {
            let rows = read_result_csv(&csv)?;
            let plot = PlotKind::parse(&kind)?;
            let path = out.unwrap_or_else(|| csv.with_extension("svg"));
            suplab::harness::emit_plot(&path, &rows, plot)?;
            println!("wrote {}", path.display());
            Ok(())
        }
    }
}

fn subcommand_for(kind: ExperimentKind) -> &'static str {
    match kind {
        ExperimentKind::SaeTrain | ExperimentKind::SaeMask => "sae",
        ExperimentKind::ModelScaling
        | ExperimentKind::DataScaling
        | ExperimentKind::MoeScaling => "classify",
        _ => "simulate",
    }
}

fn run_grid(args: RunArgs, verb: &str, allowed: &[ExperimentKind]) -> Result<()> {
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let mut config = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if !allowed.contains(&config.kind) {
        return Err(Error::Config(format!(
            "{} is a {} experiment, not {verb}",
            config.kind.tag(),
            subcommand_for(config.kind)
        )));
    }
    let format = OutputFormat::parse(&args.format)?;
    let result = run_experiment(&config)?;
    for f in &result.failures {
        eprintln!("grid point {}={} failed: {}", f.axis, f.value, f.message);
    }
    if result.rows.is_empty() {
        return Err(Error::Data("every grid point failed".into()));
    }
    let out = args
        .out
        .or_else(|| config.out_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    for path in write_outputs(&result, &out, format, config.kind.tag())? {
        println!("wrote {}", path.display());
    }
    Ok(())
}
