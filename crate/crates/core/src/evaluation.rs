//! Pixel-wise precision/recall and building-level detection scoring from
//! the mass centers of connected components.

use crate::datapipe::Polygon;
use crate::error::{Error, Result};
use crate::grid::Grid;

/// Summary metrics for one prediction/ground-truth pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub true_detections: usize,
    pub false_alarms: usize,
    pub building_count: usize,
}

/// Pixel-wise precision and recall of a predicted mask against ground
/// truth.
///
/// Precision is 1 when both masks are empty and 0 when only the prediction
/// is; recall is 1 when the ground truth is empty.
pub fn precision_recall(pred: &Grid<bool>, gt: &Grid<bool>) -> Result<(f64, f64)> {
    if !pred.same_extents(gt) {
        return Err(Error::shape(format!(
            "prediction {}x{} vs ground truth {}x{}",
            pred.height(),
            pred.width(),
            gt.height(),
            gt.width()
        )));
    }
    let mut tp = 0usize;
    let mut p = 0usize;
    let mut g = 0usize;
    for (a, b) in pred.data().iter().zip(gt.data()) {
        if *a {
            p += 1;
        }
        if *b {
            g += 1;
        }
        if *a && *b {
            tp += 1;
        }
    }
    let precision = if p == 0 {
        if g == 0 {
            1.0
        } else {
            0.0
        }
    } else {
        tp as f64 / p as f64
    };
    let recall = if g == 0 { 1.0 } else { tp as f64 / g as f64 };
    Ok((precision, recall))
}

/// An 8-connected component of a binary mask.
#[derive(Clone, Debug, PartialEq)]
pub struct Component {
    pub area: usize,
    /// Mean of member pixel indices as (row, col).
    pub center: (f64, f64),
}

/// Labels 8-connected components in row-major discovery order.
pub fn connected_components(mask: &Grid<bool>) -> Vec<Component> {
    let (h, w) = (mask.height(), mask.width());
    let mut seen = Grid::filled(h, w, false);
    let mut components = Vec::new();
    let mut stack: Vec<(usize, usize)> = Vec::new();
    for r0 in 0..h {
        for c0 in 0..w {
            if !mask.get(r0, c0) || seen.get(r0, c0) {
                continue;
            }
            let mut area = 0usize;
            let mut sum_r = 0.0f64;
            let mut sum_c = 0.0f64;
            stack.push((r0, c0));
            seen.set(r0, c0, true);
            while let Some((r, c)) = stack.pop() {
                area += 1;
                sum_r += r as f64;
                sum_c += c as f64;
                for dr in -1i64..=1 {
                    for dc in -1i64..=1 {
                        if dr == 0 && dc == 0 {
                            continue;
                        }
                        let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                        if nr < 0 || nc < 0 || nr >= h as i64 || nc >= w as i64 {
                            continue;
                        }
                        let (nr, nc) = (nr as usize, nc as usize);
                        if mask.get(nr, nc) && !seen.get(nr, nc) {
                            seen.set(nr, nc, true);
                            stack.push((nr, nc));
                        }
                    }
                }
            }
            components.push(Component {
                area,
                center: (sum_r / area as f64, sum_c / area as f64),
            });
        }
    }
    components
}

/// Ground truth for detection scoring: a rasterized mask or the source
/// polygons.
pub enum GroundTruth<'a> {
    Mask(&'a Grid<bool>),
    Polygons(&'a [Polygon]),
}

impl GroundTruth<'_> {
    fn contains(&self, center: (f64, f64)) -> bool {
        // continuous coordinates of the mass center
        let (y, x) = (center.0 + 0.5, center.1 + 0.5);
        match self {
            GroundTruth::Mask(mask) => {
                let (r, c) = (y.floor(), x.floor());
                if r < 0.0 || c < 0.0 || r >= mask.height() as f64 || c >= mask.width() as f64 {
                    return false;
                }
                mask.get(r as usize, c as usize)
            }
            GroundTruth::Polygons(polys) => polys.iter().any(|p| p.contains(x, y)),
        }
    }
}

/// Counts true detections and false alarms: the mass center of each
/// predicted component either falls inside a ground-truth building (TD) or
/// not (FA). Components smaller than `min_area` pixels are discarded first.
pub fn detect_score(pred: &Grid<bool>, gt: &GroundTruth, min_area: usize) -> (usize, usize) {
    let mut td = 0usize;
    let mut fa = 0usize;
    for comp in connected_components(pred) {
        if comp.area < min_area {
            continue;
        }
        if gt.contains(comp.center) {
            td += 1;
        } else {
            fa += 1;
        }
    }
    (td, fa)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask_from(rows: &[&str]) -> Grid<bool> {
        let h = rows.len();
        let w = rows[0].len();
        Grid::from_vec(
            h,
            w,
            rows.iter()
                .flat_map(|r| r.chars().map(|ch| ch == '#'))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn identical_masks_score_perfectly() {
        let m = mask_from(&["..##", "..##", "...."]);
        let (p, r) = precision_recall(&m, &m).unwrap();
        assert_eq!((p, r), (1.0, 1.0));
    }

    #[test]
    fn half_coverage_gives_full_precision_half_recall() {
        let gt = mask_from(&["####", "....", "...."]);
        let pred = mask_from(&["##..", "....", "...."]);
        let (p, r) = precision_recall(&pred, &gt).unwrap();
        assert_eq!((p, r), (1.0, 0.5));
    }

    #[test]
    fn overlap_counting() {
        // pred 6 px, gt 8 px, overlap 4 px
        let pred = mask_from(&["######..", "........"]);
        let gt = mask_from(&["..######", "..##...."]);
        let (p, r) = precision_recall(&pred, &gt).unwrap();
        assert!((p - 4.0 / 6.0).abs() < 1e-15);
        assert!((r - 4.0 / 8.0).abs() < 1e-15);
    }

    #[test]
    fn empty_mask_conventions() {
        let empty = Grid::filled(2, 2, false);
        let full = mask_from(&["##", "##"]);
        assert_eq!(precision_recall(&empty, &empty).unwrap(), (1.0, 1.0));
        assert_eq!(precision_recall(&empty, &full).unwrap(), (0.0, 0.0));
        assert_eq!(precision_recall(&full, &empty).unwrap(), (0.0, 1.0));
    }

    #[test]
    fn swapping_masks_swaps_precision_and_recall() {
        let a = mask_from(&["###..", ".##..", "....."]);
        let b = mask_from(&["..###", "..##.", "....."]);
        let (p1, r1) = precision_recall(&a, &b).unwrap();
        let (p2, r2) = precision_recall(&b, &a).unwrap();
        assert_eq!((p1, r1), (r2, p2));
    }

    #[test]
    fn rejects_extent_mismatch() {
        let a = Grid::filled(2, 2, false);
        let b = Grid::filled(2, 3, false);
        assert!(precision_recall(&a, &b).is_err());
    }

    #[test]
    fn components_merge_diagonals() {
        let m = mask_from(&["#....", ".#...", "..#..", ".....", "...##"]);
        let comps = connected_components(&m);
        assert_eq!(comps.len(), 2);
        assert_eq!(comps[0].area, 3);
        assert_eq!(comps[1].area, 2);
    }

    #[test]
    fn component_centers_are_pixel_means() {
        let m = mask_from(&["##", "##"]);
        let comps = connected_components(&m);
        assert_eq!(comps.len(), 1);
        assert_eq!(comps[0].center, (0.5, 0.5));
    }

    #[test]
    fn blob_inside_building_is_true_detection() {
        let gt = mask_from(&[".....", ".###.", ".###.", ".###.", "....."]);
        let pred = mask_from(&[".....", ".....", "..#..", ".....", "....."]);
        assert_eq!(detect_score(&pred, &GroundTruth::Mask(&gt), 0), (1, 0));
    }

    #[test]
    fn background_blob_is_false_alarm() {
        let gt = mask_from(&["##...", "##...", ".....", ".....", "....."]);
        let pred = mask_from(&[".....", ".....", ".....", "...##", "...##"]);
        assert_eq!(detect_score(&pred, &GroundTruth::Mask(&gt), 0), (0, 1));
    }

    #[test]
    fn u_shape_center_outside_counts_as_false_alarm() {
        // the U wraps the building; its mass center lands in the cavity
        let pred = mask_from(&["#...#", "#...#", "#...#", "#####"]);
        let gt = mask_from(&[".###.", ".###.", ".....", "....."]);
        let comps = connected_components(&pred);
        assert_eq!(comps.len(), 1);
        // hand-computed mass center of the 11 pixels: rows sum 21, cols sum 22
        assert!((comps[0].center.0 - 21.0 / 11.0).abs() < 1e-12);
        assert!((comps[0].center.1 - 2.0).abs() < 1e-12);
        assert_eq!(detect_score(&pred, &GroundTruth::Mask(&gt), 0), (0, 1));
    }

    #[test]
    fn min_area_filter_drops_speckle() {
        let gt = mask_from(&["#####", "#####", "#####", "#####", "#####"]);
        let pred = mask_from(&["##...", "##...", ".....", "....#", "....."]);
        assert_eq!(detect_score(&pred, &GroundTruth::Mask(&gt), 4), (1, 0));
        assert_eq!(detect_score(&pred, &GroundTruth::Mask(&gt), 0), (2, 0));
    }

    #[test]
    fn td_plus_fa_equals_surviving_components() {
        let pred = mask_from(&["##..#", "##...", "....#", "##..#", "....."]);
        let gt = mask_from(&["#####", ".....", ".....", ".....", "....."]);
        let comps = connected_components(&pred);
        let surviving = comps.iter().filter(|c| c.area >= 2).count();
        let (td, fa) = detect_score(&pred, &GroundTruth::Mask(&gt), 2);
        assert_eq!(td + fa, surviving);
    }

    #[test]
    fn polygon_ground_truth_matches_mask_semantics() {
        let poly = Polygon::new(vec![(1.0, 1.0), (4.0, 1.0), (4.0, 4.0), (1.0, 4.0)]).unwrap();
        let pred = mask_from(&[".....", "..##.", "..##.", ".....", "....."]);
        let polys = [poly];
        assert_eq!(detect_score(&pred, &GroundTruth::Polygons(&polys), 0), (1, 0));
    }
}
