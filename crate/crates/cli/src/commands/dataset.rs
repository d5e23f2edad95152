//! `bldnet dataset`: render seeded scenes to disk with a manifest.

use crate::config::RunConfig;
use anyhow::{Context, Result};
use bldnet::datapipe::generate_scene;
use bldnet::io::{fgrid, geojson, manifest::Manifest, manifest::ManifestEntry, png};
use std::path::Path;

pub fn run(config: &RunConfig, count: usize, out_dir: &Path) -> Result<()> {
    let scene_config = config.scene_config();
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create output directory {}", out_dir.display()))?;

    let mut entries = Vec::with_capacity(count);
    for i in 0..count {
        let seed = config.seed.wrapping_add(i as u64);
        let sample = generate_scene(seed, &scene_config)?;
        let stem = format!("scene_{:04}", i);
        let image_name = format!("{}.png", stem);
        let mask_name = format!("{}.mask.fgrid", stem);
        let poly_name = format!("{}.geojson", stem);
        png::save_rgb(&out_dir.join(&image_name), &sample.image)?;
        fgrid::write_fgrid(
            &out_dir.join(&mask_name),
            &fgrid::Fgrid::from_mask(&sample.mask),
        )?;
        geojson::write_polygons(&out_dir.join(&poly_name), &sample.polygons)?;
        entries.push(ManifestEntry {
            id: i,
            seed,
            image: image_name,
            mask: mask_name,
            polygons: poly_name,
            buildings: sample.polygons.len(),
        });
    }
    let manifest = Manifest {
        tile: scene_config.tile,
        samples: entries,
    };
    manifest.save(&out_dir.join("manifest.json"))?;
    println!(
        "wrote {} samples (tile {}) to {}",
        count,
        scene_config.tile,
        out_dir.display()
    );
    Ok(())
}
