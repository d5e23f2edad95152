//! Polygons in pixel coordinates and even-odd scanline rasterization.
//!
//! Pixel `(r, c)` covers the unit square with center `(c + 0.5, r + 0.5)`;
//! a pixel is set when its center lies inside a polygon by the even-odd
//! rule, with points exactly on an edge counting as inside.

use crate::error::{Error, Result};
use crate::grid::Grid;

/// A simple (non-self-intersecting) polygon, implicitly closed.
#[derive(Clone, Debug, PartialEq)]
pub struct Polygon {
    vertices: Vec<(f64, f64)>,
}

fn orient(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
}

fn on_segment_collinear(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> bool {
    p.0 >= a.0.min(b.0) && p.0 <= a.0.max(b.0) && p.1 >= a.1.min(b.1) && p.1 <= a.1.max(b.1)
}

/// Closed-segment intersection test.
pub(crate) fn segments_intersect(
    p1: (f64, f64),
    p2: (f64, f64),
    q1: (f64, f64),
    q2: (f64, f64),
) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment_collinear(q1, q2, p1))
        || (d2 == 0.0 && on_segment_collinear(q1, q2, p2))
        || (d3 == 0.0 && on_segment_collinear(p1, p2, q1))
        || (d4 == 0.0 && on_segment_collinear(p1, p2, q2))
}

impl Polygon {
    /// Validates vertex count, coordinate finiteness, edge lengths and
    /// non-self-intersection.
    pub fn new(vertices: Vec<(f64, f64)>) -> Result<Polygon> {
        if vertices.len() < 3 {
            return Err(Error::Polygon(format!(
                "need at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if vertices.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::Polygon("non-finite vertex coordinate".into()));
        }
        let n = vertices.len();
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            if a == b {
                return Err(Error::Polygon(format!("zero-length edge at vertex {}", i)));
            }
        }
        // non-adjacent edge pairs must not touch
        for i in 0..n {
            let (a1, a2) = (vertices[i], vertices[(i + 1) % n]);
            for j in i + 1..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if adjacent {
                    continue;
                }
                let (b1, b2) = (vertices[j], vertices[(j + 1) % n]);
                if segments_intersect(a1, a2, b1, b2) {
                    return Err(Error::Polygon(format!(
                        "edges {} and {} intersect",
                        i, j
                    )));
                }
            }
        }
        Ok(Polygon { vertices })
    }

    pub fn vertices(&self) -> &[(f64, f64)] {
        &self.vertices
    }

    /// Axis-aligned bounding box as (min_x, min_y, max_x, max_y).
    pub fn bbox(&self) -> (f64, f64, f64, f64) {
        let mut b = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, {
            f64::NEG_INFINITY
        });
        for &(x, y) in &self.vertices {
            b.0 = b.0.min(x);
            b.1 = b.1.min(y);
            b.2 = b.2.max(x);
            b.3 = b.3.max(y);
        }
        b
    }

    pub fn bbox_center(&self) -> (f64, f64) {
        let (x0, y0, x1, y1) = self.bbox();
        ((x0 + x1) / 2.0, (y0 + y1) / 2.0)
    }

    /// Even-odd membership; points exactly on an edge are inside.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let n = self.vertices.len();
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            if orient(a, b, (x, y)) == 0.0 && on_segment_collinear(a, b, (x, y)) {
                return true;
            }
        }
        let mut inside = false;
        for i in 0..n {
            let (x1, y1) = self.vertices[i];
            let (x2, y2) = self.vertices[(i + 1) % n];
            if (y1 > y) != (y2 > y) {
                let xi = x1 + (y - y1) / (y2 - y1) * (x2 - x1);
                if x < xi {
                    inside = !inside;
                }
            }
        }
        inside
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Polygon {
        Polygon {
            vertices: self.vertices.iter().map(|&(x, y)| (x + dx, y + dy)).collect(),
        }
    }

    pub fn scaled(&self, s: f64) -> Polygon {
        Polygon {
            vertices: self.vertices.iter().map(|&(x, y)| (x * s, y * s)).collect(),
        }
    }
}

/// Calls `paint(row, col)` for every pixel whose center is covered by the
/// polygon, restricted to the `height` x `width` grid.
pub(crate) fn fill_polygon(poly: &Polygon, height: usize, width: usize, paint: &mut dyn FnMut(usize, usize)) {
    let verts = poly.vertices();
    let n = verts.len();
    let (_, min_y, _, max_y) = poly.bbox();
    let r_lo = (min_y - 0.5).ceil().max(0.0) as usize;
    let r_hi = ((max_y - 0.5).floor().min(height as f64 - 1.0)).max(0.0) as usize;
    if min_y - 0.5 > height as f64 || max_y < 0.0 {
        return;
    }

    let mut crossings: Vec<f64> = Vec::with_capacity(8);
    for r in r_lo..=r_hi {
        let y = r as f64 + 0.5;
        if y < min_y || y > max_y {
            continue;
        }
        crossings.clear();
        for i in 0..n {
            let (x1, y1) = verts[i];
            let (x2, y2) = verts[(i + 1) % n];
            // half-open rule so shared vertices count once
            if (y1 > y) != (y2 > y) {
                crossings.push(x1 + (y - y1) / (y2 - y1) * (x2 - x1));
            }
        }
        crossings.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for pair in crossings.chunks(2) {
            if pair.len() < 2 {
                break;
            }
            // centers on the crossing itself count as inside
            let c_lo = ((pair[0] - 0.5).ceil()).max(0.0) as usize;
            let c_hi = (pair[1] - 0.5).floor().min(width as f64 - 1.0);
            if c_hi < 0.0 {
                continue;
            }
            for c in c_lo..=(c_hi as usize) {
                paint(r, c);
            }
        }
    }

    // pixel centers lying exactly on an edge are inside even when the
    // crossing parity says otherwise (horizontal edges in particular)
    for i in 0..n {
        let (x1, y1) = verts[i];
        let (x2, y2) = verts[(i + 1) % n];
        if y1 == y2 {
            // horizontal edge: a single candidate row
            if (y1 - 0.5).fract() == 0.0 && y1 >= 0.5 {
                let r = (y1 - 0.5) as usize;
                if r < height {
                    let c_lo = (x1.min(x2) - 0.5).ceil().max(0.0) as usize;
                    let c_hi = (x1.max(x2) - 0.5).floor().min(width as f64 - 1.0);
                    if c_hi >= 0.0 {
                        for c in c_lo..=(c_hi as usize) {
                            paint(r, c);
                        }
                    }
                }
            }
            continue;
        }
        let (lo_y, hi_y) = (y1.min(y2), y1.max(y2));
        let r_lo = (lo_y - 0.5).ceil().max(0.0) as usize;
        let r_hi = ((hi_y - 0.5).floor().min(height as f64 - 1.0)).max(0.0);
        if hi_y < 0.5 {
            continue;
        }
        for r in r_lo..=(r_hi as usize) {
            let y = r as f64 + 0.5;
            let t = (y - y1) / (y2 - y1);
            if !(0.0..=1.0).contains(&t) {
                continue;
            }
            let x = x1 + t * (x2 - x1);
            // test nearby centers with the exact collinearity predicate
            let c_guess = (x - 0.5).floor();
            for dc in -1..=1isize {
                let cf = c_guess + dc as f64;
                if cf < 0.0 || cf >= width as f64 {
                    continue;
                }
                let px = cf + 0.5;
                if orient((x1, y1), (x2, y2), (px, y)) == 0.0
                    && on_segment_collinear((x1, y1), (x2, y2), (px, y))
                {
                    paint(r, cf as usize);
                }
            }
        }
    }
}

/// Rasterizes polygons onto a binary map: a pixel is set when its center
/// lies inside any polygon (even-odd rule, edges inclusive).
pub fn rasterize(polygons: &[Polygon], height: usize, width: usize) -> Result<Grid<bool>> {
    if height == 0 || width == 0 {
        return Err(Error::invalid("rasterization extents must be positive"));
    }
    let mut mask = Grid::filled(height, width, false);
    for poly in polygons {
        fill_polygon(poly, height, width, &mut |r, c| mask.set(r, c, true));
    }
    Ok(mask)
}
