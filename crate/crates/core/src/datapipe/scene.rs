//! Seeded synthetic overhead scenes: rotated-rectangle buildings with
//! per-building albedo, shadow quads on a fixed sun side, textured
//! background, and the matching footprint mask at output resolution.

use super::polygon::{fill_polygon, rasterize, Polygon};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::tensor::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Scene generator parameters. All lengths are input-resolution pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneConfig {
    /// Square tile extent; must be divisible by 16.
    pub tile: usize,
    /// Inclusive range of buildings to place.
    pub building_count: (usize, usize),
    /// Building side lengths are drawn uniformly from this range.
    pub size_range: (f64, f64),
    /// Buildings rotate uniformly in `[0, max_rotation_deg]` degrees.
    pub max_rotation_deg: f64,
    /// Background base brightness range.
    pub background_albedo: (f64, f64),
    /// Building brightness range; keep it disjoint from the background for
    /// learnable scenes.
    pub building_albedo: (f64, f64),
    /// Amplitude of the shared additive texture noise.
    pub noise: f64,
    /// Shadow translation (dx, dy); the fixed sun side.
    pub shadow_offset: (f64, f64),
    /// Multiplicative darkening under shadows, in [0, 1).
    pub shadow_strength: f64,
    /// Minimum separation between buildings.
    pub margin: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            tile: 512,
            building_count: (6, 14),
            size_range: (15.0, 100.0),
            max_rotation_deg: 90.0,
            background_albedo: (0.16, 0.40),
            building_albedo: (0.55, 0.95),
            noise: 0.04,
            shadow_offset: (6.0, 6.0),
            shadow_strength: 0.55,
            margin: 4.0,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tile == 0 || !self.tile.is_multiple_of(16) {
            return Err(Error::invalid(format!(
                "tile {} must be a positive multiple of 16",
                self.tile
            )));
        }
        if self.building_count.0 > self.building_count.1 {
            return Err(Error::invalid("building count range is inverted"));
        }
        if !(self.size_range.0 > 0.0 && self.size_range.1 >= self.size_range.0) {
            return Err(Error::invalid("size range must be positive and ordered"));
        }
        if self.size_range.1 >= self.tile as f64 {
            return Err(Error::invalid("buildings larger than the tile"));
        }
        if !(0.0..1.0).contains(&self.shadow_strength) {
            return Err(Error::invalid("shadow strength must be in [0, 1)"));
        }
        Ok(())
    }
}

/// One rendered tile: image in `[0, 1]`, footprint mask at half resolution,
/// source polygons in image coordinates.
#[derive(Clone, Debug)]
pub struct SceneSample {
    pub image: Tensor<f64>,
    pub mask: Grid<bool>,
    pub polygons: Vec<Polygon>,
    pub seed: u64,
    /// Buildings asked for; fewer may be placed when the tile fills up.
    pub requested: usize,
}

struct RotatedRect {
    corners: [(f64, f64); 4],
}

impl RotatedRect {
    fn new(cx: f64, cy: f64, hw: f64, hh: f64, angle: f64) -> RotatedRect {
        let (sin, cos) = angle.sin_cos();
        let ux = (cos, sin);
        let uy = (-sin, cos);
        let corner = |sx: f64, sy: f64| {
            (
                cx + sx * hw * ux.0 + sy * hh * uy.0,
                cy + sx * hw * ux.1 + sy * hh * uy.1,
            )
        };
        RotatedRect {
            corners: [
                corner(1.0, 1.0),
                corner(-1.0, 1.0),
                corner(-1.0, -1.0),
                corner(1.0, -1.0),
            ],
        }
    }

    fn polygon(&self) -> Polygon {
        Polygon::new(self.corners.to_vec()).expect("rotated rectangle is simple")
    }
}

/// Separating-axis test for convex quads with a required gap.
fn quads_closer_than(a: &[(f64, f64); 4], b: &[(f64, f64); 4], gap: f64) -> bool {
    fn axes(q: &[(f64, f64); 4]) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..4).map(move |i| {
            let (x1, y1) = q[i];
            let (x2, y2) = q[(i + 1) % 4];
            let (nx, ny) = (y2 - y1, x1 - x2);
            let len = (nx * nx + ny * ny).sqrt();
            (nx / len, ny / len)
        })
    }
    for (nx, ny) in axes(a).chain(axes(b)) {
        let project = |q: &[(f64, f64); 4]| {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for &(x, y) in q {
                let p = x * nx + y * ny;
                lo = lo.min(p);
                hi = hi.max(p);
            }
            (lo, hi)
        };
        let (alo, ahi) = project(a);
        let (blo, bhi) = project(b);
        if blo - ahi > gap || alo - bhi > gap {
            return false; // separated by more than the gap
        }
    }
    true
}

/// Renders a scene fully determined by `seed`.
pub fn generate_scene(seed: u64, config: &SceneConfig) -> Result<SceneSample> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tile = config.tile;
    let tile_f = tile as f64;

    let requested = if config.building_count.1 == 0 {
        0
    } else {
        rng.gen_range(config.building_count.0..=config.building_count.1)
    };

    // place non-overlapping rotated rectangles
    let mut rects: Vec<RotatedRect> = Vec::new();
    let mut albedos: Vec<[f64; 3]> = Vec::new();
    for _ in 0..requested {
        let mut placed = false;
        for _attempt in 0..40 {
            let w = rng.gen_range(config.size_range.0..=config.size_range.1);
            let h = rng.gen_range(config.size_range.0..=config.size_range.1);
            let angle = if config.max_rotation_deg > 0.0 {
                rng.gen_range(0.0..=config.max_rotation_deg).to_radians()
            } else {
                0.0
            };
            let reach = ((w * w + h * h).sqrt()) / 2.0 + 1.0;
            if 2.0 * reach >= tile_f - 2.0 {
                continue;
            }
            let cx = rng.gen_range(reach..tile_f - reach);
            let cy = rng.gen_range(reach..tile_f - reach);
            let rect = RotatedRect::new(cx, cy, w / 2.0, h / 2.0, angle);
            if rects
                .iter()
                .any(|r| quads_closer_than(&r.corners, &rect.corners, config.margin))
            {
                continue;
            }
            let brightness = rng.gen_range(config.building_albedo.0..=config.building_albedo.1);
            let albedo = [
                (brightness + rng.gen_range(-0.06..=0.06)).clamp(0.0, 1.0),
                (brightness + rng.gen_range(-0.06..=0.06)).clamp(0.0, 1.0),
                (brightness + rng.gen_range(-0.06..=0.06)).clamp(0.0, 1.0),
            ];
            rects.push(rect);
            albedos.push(albedo);
            placed = true;
            break;
        }
        if !placed {
            break; // tile is full; record fewer buildings than requested
        }
    }
    let polygons: Vec<Polygon> = rects.iter().map(|r| r.polygon()).collect();

    // paint: background, then shadows, then roofs, then shared noise
    let base = rng.gen_range(config.background_albedo.0..=config.background_albedo.1);
    let bg = [
        (base + rng.gen_range(-0.03..=0.03)).clamp(0.0, 1.0),
        (base + rng.gen_range(-0.03..=0.03)).clamp(0.0, 1.0),
        (base + rng.gen_range(-0.03..=0.03)).clamp(0.0, 1.0),
    ];
    let mut image = Tensor::<f64>::zeros(&[tile, tile, 3]);
    for px in image.data_mut().chunks_mut(3) {
        px.copy_from_slice(&bg);
    }

    let shade = 1.0 - config.shadow_strength;
    {
        let data = image.data_mut();
        for poly in &polygons {
            let shadow = poly.translated(config.shadow_offset.0, config.shadow_offset.1);
            fill_polygon(&shadow, tile, tile, &mut |r, c| {
                for ch in 0..3 {
                    data[(r * tile + c) * 3 + ch] *= shade;
                }
            });
        }
        for (poly, albedo) in polygons.iter().zip(&albedos) {
            fill_polygon(poly, tile, tile, &mut |r, c| {
                data[(r * tile + c) * 3..(r * tile + c) * 3 + 3].copy_from_slice(albedo);
            });
        }
        // shared luminance noise, clamped into range
        for px in data.chunks_mut(3) {
            let n = rng.gen_range(-config.noise..=config.noise);
            for v in px.iter_mut() {
                *v = (*v + n).clamp(0.0, 1.0);
            }
        }
    }

    // footprint mask at output (half) resolution
    let half: Vec<Polygon> = polygons.iter().map(|p| p.scaled(0.5)).collect();
    let mask = rasterize(&half, tile / 2, tile / 2)?;

    Ok(SceneSample {
        image,
        mask,
        polygons,
        seed,
        requested,
    })
}
