//! `bldnet eval`: per-image and mean precision/recall plus TD/FA detection
//! counts for matching prediction/ground-truth file sets.

use anyhow::{bail, Context, Result};
use bldnet::evaluation::{
    connected_components, detect_score, precision_recall, GroundTruth, Metrics,
};
use bldnet::io::{fgrid, geojson};
use bldnet::labels::threshold_readout;
use std::path::{Path, PathBuf};

/// Finds the ground-truth counterpart of a prediction file: same name, or
/// the dataset's `<stem>.mask.fgrid` convention.
fn gt_counterpart(gt_dir: &Path, pred_name: &str) -> Result<PathBuf> {
    let direct = gt_dir.join(pred_name);
    if direct.exists() {
        return Ok(direct);
    }
    let stem = pred_name.trim_end_matches(".fgrid");
    let masked = gt_dir.join(format!("{}.mask.fgrid", stem));
    if masked.exists() {
        return Ok(masked);
    }
    bail!(
        "no ground truth for {} in {} (tried {} and {}.mask.fgrid)",
        pred_name,
        gt_dir.display(),
        pred_name,
        stem
    );
}

pub fn run(pred_dir: &Path, gt_dir: &Path, min_area: usize, use_polygons: bool) -> Result<()> {
    let mut pred_files: Vec<PathBuf> = std::fs::read_dir(pred_dir)
        .with_context(|| format!("cannot read {}", pred_dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().map(|e| e == "fgrid").unwrap_or(false))
        .collect();
    pred_files.sort();
    if pred_files.is_empty() {
        bail!("no .fgrid predictions in {}", pred_dir.display());
    }

    println!("image\tprecision\trecall\ttd\tfa\tbuildings");
    let mut sum_p = 0.0;
    let mut sum_r = 0.0;
    let (mut total_td, mut total_fa, mut total_buildings) = (0usize, 0usize, 0usize);
    for pred_path in &pred_files {
        let name = pred_path.file_name().unwrap().to_string_lossy().to_string();
        let values = fgrid::read_fgrid(pred_path)?.to_grid()?;
        let (pred_building, _) = threshold_readout(&values);

        let gt_path = gt_counterpart(gt_dir, &name)?;
        let gt_mask = fgrid::read_fgrid(&gt_path)?.to_mask()?;
        let (precision, recall) = precision_recall(&pred_building, &gt_mask)?;

        let stem = name.trim_end_matches(".fgrid").trim_end_matches(".mask");
        let poly_path = gt_dir.join(format!("{}.geojson", stem));
        let (td, fa, buildings) = if use_polygons {
            let polys = geojson::read_polygons(&poly_path)?;
            // detection runs at mask (output) resolution; polygons are in
            // input coordinates
            let half: Vec<_> = polys.iter().map(|p| p.scaled(0.5)).collect();
            let (td, fa) = detect_score(&pred_building, &GroundTruth::Polygons(&half), min_area);
            (td, fa, polys.len())
        } else {
            let (td, fa) = detect_score(&pred_building, &GroundTruth::Mask(&gt_mask), min_area);
            (td, fa, connected_components(&gt_mask).len())
        };
        let metrics = Metrics {
            precision,
            recall,
            true_detections: td,
            false_alarms: fa,
            building_count: buildings,
        };

        println!(
            "{}\t{:.6}\t{:.6}\t{}\t{}\t{}",
            name,
            metrics.precision,
            metrics.recall,
            metrics.true_detections,
            metrics.false_alarms,
            metrics.building_count
        );
        sum_p += metrics.precision;
        sum_r += metrics.recall;
        total_td += metrics.true_detections;
        total_fa += metrics.false_alarms;
        total_buildings += metrics.building_count;
    }

    let n = pred_files.len() as f64;
    println!("images={}", pred_files.len());
    println!("mean_precision={:.6}", sum_p / n);
    println!("mean_recall={:.6}", sum_r / n);
    println!("total_td={}", total_td);
    println!("total_fa={}", total_fa);
    println!("total_buildings={}", total_buildings);
    Ok(())
}
