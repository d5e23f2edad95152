//! Command-line pipeline for the building extractor: dataset generation,
//! training, inference, evaluation and receptive-field analysis.

mod commands;
mod config;
mod specfile;

use anyhow::Result;
use clap::{Parser, Subcommand};
use config::RunConfig;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "bldnet",
    version,
    about = "Dense-prediction building extraction on synthetic overhead scenes"
)]
struct Cli {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Overrides the configured float precision (32 or 64).
    #[arg(long, global = true)]
    precision: Option<u32>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset directory.
    Dataset {
        /// Number of scene samples to render.
        #[arg(long)]
        count: usize,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train on a dataset directory and write the best checkpoint.
    Train {
        /// Dataset directory produced by `dataset`.
        #[arg(long)]
        dataset: PathBuf,
        /// Checkpoint output path.
        #[arg(long)]
        out: PathBuf,
        /// Epoch log path (defaults to the checkpoint with a .log extension).
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Run inference on a PNG image.
    Infer {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        image: PathBuf,
        /// Prefix for the .fgrid field and overlay PNGs.
        #[arg(long)]
        out_prefix: PathBuf,
    },
    /// Score prediction fields against ground-truth masks.
    Eval {
        /// Directory of predicted .fgrid value fields.
        #[arg(long)]
        pred: PathBuf,
        /// Directory of ground-truth masks (and optional .geojson files).
        #[arg(long)]
        gt: PathBuf,
        /// Discard predicted components below this pixel area.
        #[arg(long, default_value_t = 4)]
        min_area: usize,
        /// Test detection centers against polygons instead of the mask.
        #[arg(long)]
        gt_polygons: bool,
    },
    /// Print the receptive-field chain and stage extents.
    Rf {
        /// Network spec file; overrides --preset.
        #[arg(long)]
        file: Option<PathBuf>,
        /// Built-in configuration: standard or reduced.
        #[arg(long, default_value = "standard")]
        preset: String,
        /// Input extent used for the per-stage output sizes.
        #[arg(long, default_value_t = 512)]
        input_size: usize,
    },
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(precision) = cli.precision {
        config.precision = precision;
    }
    config.check()?;
    Ok(config)
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Dataset { count, out } => {
            let config = load_config(&cli)?;
            commands::dataset::run(&config, *count, out)
        }
        Command::Train { dataset, out, log } => {
            let config = load_config(&cli)?;
            commands::train::run(&config, dataset, out, log.as_deref())
        }
        Command::Infer {
            checkpoint,
            image,
            out_prefix,
        } => {
            let config = load_config(&cli)?;
            commands::infer::run(&config, checkpoint, image, out_prefix)
        }
        Command::Eval {
            pred,
            gt,
            min_area,
            gt_polygons,
        } => commands::eval::run(pred, gt, *min_area, *gt_polygons),
        Command::Rf {
            file,
            preset,
            input_size,
        } => commands::rf::run(file.as_deref(), preset, *input_size),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        // single-line machine-parsable diagnostic
        let msg = format!("{:#}", e).replace('\n', " ");
        eprintln!("error: {}", msg);
        std::process::exit(1);
    }
}
