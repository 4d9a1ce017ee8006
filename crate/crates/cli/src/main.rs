use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use monpol_core::auction::{demand_grid, strategyproofness_probe, AuctionInstance};
use monpol_core::harness::{
    compare_runs, read_epochs_csv, run_experiment, sample_auction, stability_region, write_comparison_csv,
    write_stability_csv, write_summary_csv, ExperimentConfig, ModelKind, RunArtifacts,
};
use monpol_core::seed::stream;
use monpol_core::Error;

#[derive(Parser)]
#[command(name = "monpol", version, about = "Stablecoin monetary-policy experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML); defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides `output_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 1 gives single-threaded execution.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the configured economy and write epochs.csv and summary.csv.
    Run {
        #[command(flatten)]
        common: Common,
        /// Run without the controller.
        #[arg(long)]
        baseline: bool,
    },
    /// Compare the summary statistics of two epoch CSV files (or run directories).
    Compare {
        #[command(flatten)]
        common: Common,
        a: PathBuf,
        b: PathBuf,
    },
    /// Sweep (φ_y, φ_π) and write stability.csv.
    StabilityRegion {
        #[command(flatten)]
        common: Common,
    },
    /// Probe every bidder of an auction with a grid of demand misreports.
    AuctionProbe {
        #[command(flatten)]
        common: Common,
        /// Auction instance (TOML); sampled from the config when absent.
        #[arg(long)]
        instance: Option<PathBuf>,
        #[arg(long, default_value_t = 21)]
        points: usize,
    },
}

fn load(common: &Common) -> Result<(ExperimentConfig, PathBuf), Error> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::from_path(path).map_err(|e| match e {
            Error::Io(io) => Error::Config(vec![format!("{}: {io}", path.display())]),
            other => other,
        })?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output_dir));
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(vec![format!("threads: {e}")]))?;
    }
    Ok((cfg, out))
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, Error> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn epochs_file(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join("epochs.csv")
    } else {
        path.to_path_buf()
    }
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run { common, baseline } => {
            let (mut cfg, out) = load(&common)?;
            cfg.baseline |= baseline;
            let art = run_experiment(&cfg)?;
            art.write_csv(create(&out, "epochs.csv")?)?;
            write_summary_csv(&art.summary, create(&out, "summary.csv")?)?;
            for (name, v) in art.summary.metrics() {
                println!("{name:<26} {v:.6e}");
            }
        }
        Command::Compare { common, a, b } => {
            let (cfg, out) = load(&common)?;
            let target = match cfg.model {
                ModelKind::Taylor => cfg.taylor.pi_star,
                _ => 1.0,
            };
            let read = |p: &Path| -> Result<RunArtifacts, Error> {
                Ok(RunArtifacts::new(read_epochs_csv(File::open(epochs_file(p))?)?, target))
            };
            let deltas = compare_runs(&read(&a)?, &read(&b)?)?;
            write_comparison_csv(&deltas, create(&out, "comparison.csv")?)?;
            println!("{:<26} {:>13} {:>13} {:>13} {:>13}", "metric", "a", "b", "delta", "ratio");
            for d in deltas {
                println!(
                    "{:<26} {:>13.6e} {:>13.6e} {:>13.6e} {:>13.6e}",
                    d.metric, d.a, d.b, d.delta, d.ratio
                );
            }
        }
        Command::StabilityRegion { common } => {
            let (cfg, out) = load(&common)?;
            let points = stability_region(&cfg)?;
            write_stability_csv(&points, create(&out, "stability.csv")?)?;
            let stable = points.iter().filter(|p| p.stable).count();
            println!("{stable} of {} grid points stable", points.len());
        }
        Command::AuctionProbe {
            common,
            instance,
            points,
        } => {
            let (cfg, out) = load(&common)?;
            let inst = match instance {
                Some(path) => AuctionInstance::from_toml_str(&fs::read_to_string(path)?)?,
                None => sample_auction(&cfg, &mut stream(cfg.seed, "auction-probe")),
            };
            let mut w = csv::Writer::from_writer(create(&out, "probe.csv")?);
            let io = |e: csv::Error| Error::Io(std::io::Error::other(e.to_string()));
            w.write_record(["user", "max_gain"]).map_err(io)?;
            for (i, report) in inst.reports.iter().enumerate() {
                let gain = strategyproofness_probe(&inst, i, &demand_grid(report, points))?;
                w.write_record([i.to_string(), gain.to_string()]).map_err(io)?;
                println!("user {i}: max gain {gain:.3e}");
            }
            w.flush()?;
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::Config(_) | Error::Parse { .. } => 2,
        Error::IterationLimit { .. } => 4,
        _ => 3,
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
