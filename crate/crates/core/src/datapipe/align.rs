//! Footprint-to-image alignment by normalized cross-correlation between the
//! mask's boundary map and the image gradient magnitude.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::labels::boundary_map;
use crate::tensor::Tensor;

/// Gradient magnitude by central differences per channel, summed over
/// channels. Border pixels (where the centered stencil does not fit) are
/// zero.
pub fn gradient_magnitude(image: &Tensor<f64>) -> Result<Grid<f64>> {
    let (h, w, c) = image.dims3()?;
    let data = image.data();
    let mut out = Grid::filled(h, w, 0.0);
    for r in 1..h.saturating_sub(1) {
        for col in 1..w.saturating_sub(1) {
            let mut mag = 0.0;
            for ch in 0..c {
                let gx = (data[(r * w + col + 1) * c + ch] - data[(r * w + col - 1) * c + ch]) / 2.0;
                let gy = (data[((r + 1) * w + col) * c + ch] - data[((r - 1) * w + col) * c + ch]) / 2.0;
                mag += (gx * gx + gy * gy).sqrt();
            }
            out.set(r, col, mag);
        }
    }
    Ok(out)
}

/// Pearson correlation of the boundary map shifted by `(dx, dy)` against the
/// gradient map, over the valid overlap. Zero when either side is constant.
fn shifted_ncc(boundary: &Grid<f64>, grad: &Grid<f64>, dx: i64, dy: i64) -> f64 {
    let (h, w) = (grad.height() as i64, grad.width() as i64);
    let r0 = dy.max(0);
    let r1 = h + dy.min(0);
    let c0 = dx.max(0);
    let c1 = w + dx.min(0);
    let count = ((r1 - r0) * (c1 - c0)) as f64;
    if count <= 1.0 {
        return 0.0;
    }
    let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for r in r0..r1 {
        for c in c0..c1 {
            let a = boundary.get((r - dy) as usize, (c - dx) as usize);
            let b = grad.get(r as usize, c as usize);
            sa += a;
            sb += b;
            saa += a * a;
            sbb += b * b;
            sab += a * b;
        }
    }
    let cov = sab - sa * sb / count;
    let va = saa - sa * sa / count;
    let vb = sbb - sb * sb / count;
    if va <= 0.0 || vb <= 0.0 {
        return 0.0;
    }
    cov / (va * vb).sqrt()
}

/// Finds the integer shift of the footprint mask that best aligns its
/// boundary with the image gradients.
///
/// Returns the `(dx, dy)` within `±max_shift` maximizing the normalized
/// cross-correlation; ties break by smallest `|dx| + |dy|`, then row-major
/// scan order.
pub fn align_footprints(
    mask: &Grid<bool>,
    image: &Tensor<f64>,
    max_shift: usize,
) -> Result<(i64, i64)> {
    let (h, w, _) = image.dims3()?;
    if mask.height() != h || mask.width() != w {
        return Err(Error::shape(format!(
            "mask {}x{} does not cover image {}x{}",
            mask.height(),
            mask.width(),
            h,
            w
        )));
    }
    if 2 * max_shift >= h.min(w) {
        return Err(Error::invalid(format!(
            "max shift {} too large for {}x{} extents",
            max_shift, h, w
        )));
    }
    let boundary = boundary_map(mask).map(|b| if b { 1.0 } else { 0.0 });
    let grad = gradient_magnitude(image)?;

    let m = max_shift as i64;
    let mut best = (f64::NEG_INFINITY, i64::MAX, (0i64, 0i64));
    for dy in -m..=m {
        for dx in -m..=m {
            let score = shifted_ncc(&boundary, &grad, dx, dy);
            let manhattan = dx.abs() + dy.abs();
            if score > best.0 || (score == best.0 && manhattan < best.1) {
                best = (score, manhattan, (dx, dy));
            }
        }
    }
    Ok(best.2)
}
