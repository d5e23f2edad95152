//! `bldnet train`: train on a generated dataset directory, writing the
//! best-validation checkpoint and the epoch log.

use crate::config::RunConfig;
use anyhow::{Context, Result};
use bldnet::datapipe::SceneSample;
use bldnet::io::{checkpoint, fgrid, geojson, manifest::Manifest, png};
use bldnet::netgraph::ParamSet;
use bldnet::tensor::Element;
use bldnet::trainer::train;
use std::io::Write;
use std::path::Path;

pub fn load_dataset(dir: &Path) -> Result<Vec<SceneSample>> {
    let manifest = Manifest::load(&dir.join("manifest.json"))?;
    let mut samples = Vec::with_capacity(manifest.samples.len());
    for entry in &manifest.samples {
        let image = png::load_rgb(&dir.join(&entry.image))
            .with_context(|| format!("sample {} image", entry.id))?;
        let mask = fgrid::read_fgrid(&dir.join(&entry.mask))
            .and_then(|f| f.to_mask())
            .with_context(|| format!("sample {} mask", entry.id))?;
        let polygons = geojson::read_polygons(&dir.join(&entry.polygons))
            .with_context(|| format!("sample {} polygons", entry.id))?;
        samples.push(SceneSample {
            image,
            mask,
            polygons,
            seed: entry.seed,
            requested: entry.buildings,
        });
    }
    Ok(samples)
}

fn train_generic<E: Element>(
    config: &RunConfig,
    samples: &[SceneSample],
    out_checkpoint: &Path,
    log_path: &Path,
) -> Result<()> {
    let spec = config.network_spec()?;
    let train_config = config.train_config();
    let result = train::<E>(&spec, samples, &train_config)?;

    let mut log = std::fs::File::create(log_path)
        .with_context(|| format!("cannot create log {}", log_path.display()))?;
    for record in &result.log {
        writeln!(log, "{}", record.to_log_line())?;
    }

    let best = ParamSet {
        velocity: result.best_weights.zeros_like(),
        weights: result.best_weights,
    };
    checkpoint::save_checkpoint(out_checkpoint, &spec, &best)?;

    match result.best_epoch {
        Some(epoch) => println!(
            "trained {} epochs; best validation at epoch {} ({:.4})",
            result.log.len(),
            epoch,
            result.log[epoch].val_misclassification
        ),
        None => println!(
            "trained {} epochs; no validation split, kept final weights",
            result.log.len()
        ),
    }
    println!("checkpoint: {}", out_checkpoint.display());
    Ok(())
}

pub fn run(
    config: &RunConfig,
    dataset_dir: &Path,
    out_checkpoint: &Path,
    log_path: Option<&Path>,
) -> Result<()> {
    let samples = load_dataset(dataset_dir)?;
    let default_log = out_checkpoint.with_extension("log");
    let log_path = log_path.unwrap_or(&default_log);
    match config.precision {
        32 => train_generic::<f32>(config, &samples, out_checkpoint, log_path),
        _ => train_generic::<f64>(config, &samples, out_checkpoint, log_path),
    }
}
