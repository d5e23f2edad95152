//! `bldnet infer`: forward a PNG through a checkpoint, write the decoded
//! distance field and red/blue overlay renderings.

use crate::config::RunConfig;
use anyhow::{bail, Context, Result};
use bldnet::grid::Grid;
use bldnet::io::{checkpoint, fgrid, png};
use bldnet::labels::{expectation_decode, threshold_readout};
use bldnet::netgraph::forward;
use bldnet::tensor::{Element, Tensor};
use std::path::Path;

/// Nearest-neighbor upscale of a mask onto the input grid, blended over the
/// source image. `color` is RGB; `alpha` 1.0 paints solid.
fn overlay(
    image: &Tensor<f64>,
    mask: &Grid<bool>,
    scale: usize,
    color: [f64; 3],
    alpha: f64,
) -> Tensor<f64> {
    let (h, w, _) = image.dims3().expect("rgb image");
    let mut out = image.clone();
    let data = out.data_mut();
    for r in 0..h {
        for c in 0..w {
            if mask.get(r / scale, c / scale) {
                for ch in 0..3 {
                    let v = &mut data[(r * w + c) * 3 + ch];
                    *v = (1.0 - alpha) * *v + alpha * color[ch];
                }
            }
        }
    }
    out
}

fn infer_generic<E: Element>(
    checkpoint_path: &Path,
    image_path: &Path,
    out_prefix: &Path,
) -> Result<()> {
    let (spec, params) = checkpoint::load_checkpoint::<E>(checkpoint_path)?;
    let image = png::load_rgb(image_path)?;
    let (h, w, _) = image.dims3()?;
    let divisor = spec.required_divisor();
    if h % divisor != 0 || w % divisor != 0 {
        bail!(
            "image is {}x{}, but extents must be multiples of {}; \
             crop or pad the image (e.g. to {}x{}) and retry",
            h,
            w,
            divisor,
            h / divisor * divisor,
            w / divisor * divisor
        );
    }

    let (probs, _) = forward(&spec, &params.weights, &image.cast::<E>(), false)?;
    let values = expectation_decode(&probs)?;
    let (building, boundary) = threshold_readout(&values);

    let field_path = out_prefix.with_extension("fgrid");
    fgrid::write_fgrid(&field_path, &fgrid::Fgrid::from_grid(&values))?;

    let scale = h / values.height();
    let building_img = overlay(&image, &building, scale, [1.0, 0.0, 0.0], 0.5);
    let boundary_img = overlay(&image, &boundary, scale, [0.0, 0.0, 1.0], 1.0);
    let building_path = out_prefix.with_extension("building.png");
    let boundary_path = out_prefix.with_extension("boundary.png");
    png::save_rgb(&building_path, &building_img)?;
    png::save_rgb(&boundary_path, &boundary_img)?;

    println!(
        "field: {} ({}x{}); overlays: {}, {}",
        field_path.display(),
        values.height(),
        values.width(),
        building_path.display(),
        boundary_path.display()
    );
    Ok(())
}

pub fn run(
    config: &RunConfig,
    checkpoint_path: &Path,
    image_path: &Path,
    out_prefix: &Path,
) -> Result<()> {
    if let Some(parent) = out_prefix.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("cannot create {}", parent.display()))?;
        }
    }
    match config.precision {
        32 => infer_generic::<f32>(checkpoint_path, image_path, out_prefix),
        _ => infer_generic::<f64>(checkpoint_path, image_path, out_prefix),
    }
}
