//! Command-line entry point for the selective-classification evaluation
//! harness. Subcommands read a JSON config (every key optional) and write
//! deterministic CSV trees; exit status is nonzero on any error or failed
//! trend assertion.

use clap::{Parser, Subcommand};
use selgap::harness::{self, ExperimentConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "selgap",
    version,
    about = "Selective-classification evaluation: curves, oracle bound, gap decomposition"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// JSON experiment config; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run a single seed instead of the config's seed list.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's confidence parameter delta.
    #[arg(long)]
    delta: Option<f64>,
}

impl ConfigArgs {
    fn load(&self) -> selgap::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::read(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(out) = &self.out {
            cfg.out_dir = out.display().to_string();
        }
        if let Some(seed) = self.seed {
            cfg.seeds = vec![seed];
        }
        if let Some(delta) = self.delta {
            cfg.delta = delta;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Sample the configured task and write train/val/test CSVs per seed.
    GenData(ConfigArgs),
    /// Train the configured models and store weight files and loss traces.
    Train(ConfigArgs),
    /// Score the test split and write scored rows, curve, and gap curve.
    Curve(ConfigArgs),
    /// Estimate the gap decomposition per coverage and write its CSV.
    Decompose(ConfigArgs),
    /// Fit post-hoc calibrators and report ECE and curves per variant.
    Calibrate(ConfigArgs),
    /// Train a loss predictor and trace its advantage over self-entropy.
    LossPred(ConfigArgs),
    /// Two-moons noise sweep; asserts the E-AURC trend in sigma.
    SweepNoise(ConfigArgs),
    /// Model-capacity sweep with per-spec E-AURC comparison.
    SweepCapacity(ConfigArgs),
    /// MSP vs temperature scaling vs deep ensembles (ECE and E-AURC).
    CalibrationStudy(ConfigArgs),
    /// Accuracy-coverage under the benchmark shifts, with the MMD gauge.
    ShiftStudy(ConfigArgs),
    /// Merge run directories into one consolidated report and plot data.
    Report {
        /// Run directories (each containing a report.csv).
        dirs: Vec<PathBuf>,
        /// Output directory for the merged files.
        #[arg(long, default_value = "report_out")]
        out: PathBuf,
    },
}

fn run() -> selgap::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::GenData(args) => harness::cmd_gen_data(&args.load()?),
        Command::Train(args) => harness::cmd_train(&args.load()?),
        Command::Curve(args) => harness::cmd_curve(&args.load()?).map(|_| ()),
        Command::Decompose(args) => harness::cmd_decompose(&args.load()?).map(|_| ()),
        Command::Calibrate(args) => harness::cmd_calibrate(&args.load()?).map(|_| ()),
        Command::LossPred(args) => harness::cmd_loss_pred(&args.load()?).map(|_| ()),
        Command::SweepNoise(args) => harness::cmd_sweep_noise(&args.load()?).map(|_| ()),
        Command::SweepCapacity(args) => harness::cmd_sweep_capacity(&args.load()?).map(|_| ()),
        Command::CalibrationStudy(args) => {
            harness::cmd_calibration_study(&args.load()?).map(|_| ())
        }
        Command::ShiftStudy(args) => harness::cmd_shift_study(&args.load()?).map(|_| ()),
        Command::Report { dirs, out } => harness::cmd_report(&dirs, &out),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("selgap: {e}");
            ExitCode::FAILURE
        }
    }
}
