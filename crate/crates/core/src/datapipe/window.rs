//! Tile-window selection: choose a crop around an anchor building that cuts
//! through as few other buildings as possible.

use super::polygon::{segments_intersect, Polygon};
use crate::error::{Error, Result};

/// Default candidate-grid stride in pixels.
pub const DEFAULT_WINDOW_STRIDE: usize = 8;
/// Default search radius around the anchor center in pixels.
pub const DEFAULT_WINDOW_SEARCH_RADIUS: usize = 64;

/// Does the polygon cross the border of the axis-aligned window
/// `[x0, x0 + size] x [y0, y0 + size]`? A polygon crosses when some edge
/// intersects the window outline, or when the polygon strictly surrounds
/// the window.
pub(crate) fn polygon_crosses_window(poly: &Polygon, x0: f64, y0: f64, size: f64) -> bool {
    let (x1, y1) = (x0 + size, y0 + size);
    let corners = [(x0, y0), (x1, y0), (x1, y1), (x0, y1)];
    let verts = poly.vertices();
    let n = verts.len();
    for i in 0..n {
        let a = verts[i];
        let b = verts[(i + 1) % n];
        for j in 0..4 {
            if segments_intersect(a, b, corners[j], corners[(j + 1) % 4]) {
                return true;
            }
        }
    }
    // no edge touches the outline: either fully inside, fully outside, or
    // the polygon swallows the whole window (which still cuts the border)
    corners.iter().any(|&(cx, cy)| poly.contains(cx, cy))
}

/// Count of polygons cut by the window border.
pub fn border_crossing_count(polygons: &[Polygon], x0: f64, y0: f64, size: f64) -> usize {
    polygons
        .iter()
        .filter(|p| polygon_crosses_window(p, x0, y0, size))
        .count()
}

/// Picks the window origin minimizing the number of polygons crossing the
/// window border.
///
/// Candidates lie on a `stride` grid within `search_radius` of the anchor
/// polygon's bounding-box center, clipped to windows fully inside the
/// `scene_width` x `scene_height` scene. Ties break by distance of the
/// window center to the anchor center, then by row-major candidate order.
pub fn select_tile_window(
    polygons: &[Polygon],
    anchor: &Polygon,
    window: usize,
    stride: usize,
    search_radius: usize,
    scene_height: usize,
    scene_width: usize,
) -> Result<(i64, i64)> {
    if window == 0 || window > scene_width || window > scene_height {
        return Err(Error::invalid(format!(
            "window {} does not fit in {}x{} scene",
            window, scene_height, scene_width
        )));
    }
    let stride = stride.max(1) as i64;
    let radius = search_radius as i64;
    let (cx, cy) = anchor.bbox_center();
    let base_x = (cx - window as f64 / 2.0).round() as i64;
    let base_y = (cy - window as f64 / 2.0).round() as i64;

    let mut best: Option<(usize, f64, (i64, i64))> = None;
    let mut dy = -radius;
    while dy <= radius {
        let mut dx = -radius;
        while dx <= radius {
            let (ox, oy) = (base_x + dx, base_y + dy);
            if ox >= 0
                && oy >= 0
                && ox + window as i64 <= scene_width as i64
                && oy + window as i64 <= scene_height as i64
            {
                let count = border_crossing_count(polygons, ox as f64, oy as f64, window as f64);
                let wx = ox as f64 + window as f64 / 2.0;
                let wy = oy as f64 + window as f64 / 2.0;
                let dist2 = (wx - cx) * (wx - cx) + (wy - cy) * (wy - cy);
                let better = match &best {
                    None => true,
                    Some((bc, bd, _)) => count < *bc || (count == *bc && dist2 < *bd),
                };
                if better {
                    best = Some((count, dist2, (ox, oy)));
                }
            }
            dx += stride;
        }
        dy += stride;
    }
    best.map(|(_, _, origin)| origin)
        .ok_or_else(|| Error::invalid("no candidate window fits in the scene".to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Polygon {
        Polygon::new(vec![(x0, y0), (x1, y0), (x1, y1), (x0, y1)]).unwrap()
    }

    #[test]
    fn isolated_polygon_gets_clean_window() {
        let anchor = rect(100.0, 100.0, 130.0, 120.0);
        let polygons = vec![anchor.clone(), rect(400.0, 400.0, 440.0, 430.0)];
        let (ox, oy) =
            select_tile_window(&polygons, &anchor, 64, 8, 32, 512, 512).unwrap();
        assert_eq!(
            border_crossing_count(&polygons, ox as f64, oy as f64, 64.0),
            0
        );
        // chosen window contains the anchor completely
        assert!(ox as f64 <= 100.0 && (ox + 64) as f64 >= 130.0);
        assert!(oy as f64 <= 100.0 && (oy + 64) as f64 >= 120.0);
    }

    #[test]
    fn dense_lattice_matches_exhaustive_minimum() {
        // building lattice with pitch smaller than the window
        let mut polygons = Vec::new();
        for by in 0..10 {
            for bx in 0..10 {
                let x = 10.0 + bx as f64 * 30.0;
                let y = 10.0 + by as f64 * 30.0;
                polygons.push(rect(x, y, x + 22.0, y + 22.0));
            }
        }
        let anchor = polygons[44].clone();
        let window = 80usize;
        let (stride, radius) = (8usize, 24usize);
        let (ox, oy) =
            select_tile_window(&polygons, &anchor, window, stride, radius, 320, 320).unwrap();
        let got = border_crossing_count(&polygons, ox as f64, oy as f64, window as f64);
        assert!(got >= 1, "every candidate must cross the lattice");

        // exhaustive re-enumeration of the same candidate grid
        let (cx, cy) = anchor.bbox_center();
        let base_x = (cx - window as f64 / 2.0).round() as i64;
        let base_y = (cy - window as f64 / 2.0).round() as i64;
        let mut minimum = usize::MAX;
        let mut dy = -(radius as i64);
        while dy <= radius as i64 {
            let mut dx = -(radius as i64);
            while dx <= radius as i64 {
                let (x, y) = (base_x + dx, base_y + dy);
                if x >= 0 && y >= 0 && x + window as i64 <= 320 && y + window as i64 <= 320 {
                    minimum = minimum
                        .min(border_crossing_count(&polygons, x as f64, y as f64, window as f64));
                }
                dx += stride as i64;
            }
            dy += stride as i64;
        }
        assert_eq!(got, minimum);
    }

    #[test]
    fn zero_radius_centers_on_anchor() {
        let anchor = rect(100.0, 80.0, 120.0, 100.0);
        let (ox, oy) =
            select_tile_window(std::slice::from_ref(&anchor), &anchor, 64, 8, 0, 256, 256)
                .unwrap();
        // single candidate: window centered on the anchor bbox center
        assert_eq!((ox, oy), (110 - 32, 90 - 32));
    }

    #[test]
    fn rejects_oversized_window() {
        let anchor = rect(1.0, 1.0, 3.0, 3.0);
        assert!(
            select_tile_window(std::slice::from_ref(&anchor), &anchor, 600, 8, 8, 512, 512)
                .is_err()
        );
    }

    #[test]
    fn surrounding_polygon_counts_as_crossing() {
        let big = rect(0.0, 0.0, 200.0, 200.0);
        assert!(polygon_crosses_window(&big, 50.0, 50.0, 20.0));
        let inside = rect(55.0, 55.0, 65.0, 65.0);
        assert!(!polygon_crosses_window(&inside, 50.0, 50.0, 20.0));
        let outside = rect(500.0, 500.0, 520.0, 520.0);
        assert!(!polygon_crosses_window(&outside, 50.0, 50.0, 20.0));
        let cut = rect(45.0, 55.0, 60.0, 60.0);
        assert!(polygon_crosses_window(&cut, 50.0, 50.0, 20.0));
    }
}
