//! Signed-distance label fields: exact Euclidean distance to the building
//! boundary (positive inside, zero on the boundary, negative outside),
//! 128-class quantization, expectation decoding and thresholded readout.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::tensor::{Element, Tensor};

/// Number of quantized distance classes.
pub const NUM_CLASSES: usize = 128;
/// Most negative representable distance class.
pub const CLASS_MIN: i32 = -64;
/// Most positive representable distance class.
pub const CLASS_MAX: i32 = 63;

/// Per-pixel signed distances plus their quantized integer classes.
#[derive(Clone, Debug)]
pub struct LabelField {
    values: Grid<f64>,
    classes: Grid<i8>,
}

impl LabelField {
    /// Builds the label field for a binary building mask.
    pub fn from_mask(mask: &Grid<bool>) -> LabelField {
        let values = signed_distance_transform_bool(mask);
        let classes = quantize(&values);
        LabelField { values, classes }
    }

    /// Signed distances in output-pixel units.
    pub fn values(&self) -> &Grid<f64> {
        &self.values
    }

    /// Quantized classes in `[-64, 63]`.
    pub fn classes(&self) -> &Grid<i8> {
        &self.classes
    }

    /// Classes shifted to softmax channel indices in `[0, 127]`.
    pub fn class_indices(&self) -> Grid<u8> {
        self.classes.map(|v| (v as i32 - CLASS_MIN) as u8)
    }
}

/// Squared-distance lower-envelope transform along one dimension
/// (Felzenszwalb-Huttenlocher). `f` holds squared distances (or infinity
/// where no site exists); returns the exact 1-D squared distance transform.
fn dt_one_dim(f: &[f64], out: &mut [f64], v: &mut Vec<usize>, z: &mut Vec<f64>) {
    let n = f.len();
    // v[i] is a parabola site index, z[i] the left edge of the interval
    // where parabola v[i] forms the lower envelope.
    v.clear();
    z.clear();
    for q in 0..n {
        if f[q].is_infinite() {
            continue;
        }
        let fq = f[q] + (q * q) as f64;
        let mut s = f64::NEG_INFINITY;
        while let Some(&p) = v.last() {
            let fp = f[p] + (p * p) as f64;
            s = (fq - fp) / (2.0 * (q as f64 - p as f64));
            if s <= *z.last().unwrap() {
                v.pop();
                z.pop();
            } else {
                break;
            }
        }
        if v.is_empty() {
            z.push(f64::NEG_INFINITY);
        } else {
            z.push(s);
        }
        v.push(q);
    }
    if v.is_empty() {
        out.fill(f64::INFINITY);
        return;
    }
    let mut k = 0usize;
    for (q, o) in out.iter_mut().enumerate() {
        while k + 1 < v.len() && z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let d = q as f64 - p as f64;
        *o = d * d + f[p];
    }
}

/// Exact squared Euclidean distance of every pixel to the nearest site.
fn squared_edt(sites: &Grid<bool>) -> Grid<f64> {
    let (h, w) = (sites.height(), sites.width());
    // pass 1: per-column distance along rows via two linear scans
    let mut colsq = Grid::filled(h, w, f64::INFINITY);
    for c in 0..w {
        let mut last: Option<usize> = None;
        for r in 0..h {
            if sites.get(r, c) {
                last = Some(r);
            }
            if let Some(lr) = last {
                let d = (r - lr) as f64;
                colsq.set(r, c, d * d);
            }
        }
        last = None;
        for r in (0..h).rev() {
            if sites.get(r, c) {
                last = Some(r);
            }
            if let Some(lr) = last {
                let d = (lr - r) as f64;
                let d2 = d * d;
                if d2 < colsq.get(r, c) {
                    colsq.set(r, c, d2);
                }
            }
        }
    }
    // pass 2: lower envelope along each row
    let mut out = Grid::filled(h, w, f64::INFINITY);
    let mut v = Vec::with_capacity(w);
    let mut z = Vec::with_capacity(w + 1);
    let mut rowbuf = vec![0.0f64; w];
    for r in 0..h {
        dt_one_dim(colsq.row(r), &mut rowbuf, &mut v, &mut z);
        for (c, &d2) in rowbuf.iter().enumerate() {
            out.set(r, c, d2);
        }
    }
    out
}

/// Boundary pixels: building pixels with a 4-adjacent background pixel or
/// lying on the image edge.
pub fn boundary_map(mask: &Grid<bool>) -> Grid<bool> {
    let (h, w) = (mask.height(), mask.width());
    let mut b = Grid::filled(h, w, false);
    for r in 0..h {
        for c in 0..w {
            if !mask.get(r, c) {
                continue;
            }
            let on_edge = r == 0 || c == 0 || r == h - 1 || c == w - 1;
            let bg = (r > 0 && !mask.get(r - 1, c))
                || (r + 1 < h && !mask.get(r + 1, c))
                || (c > 0 && !mask.get(r, c - 1))
                || (c + 1 < w && !mask.get(r, c + 1));
            if on_edge || bg {
                b.set(r, c, true);
            }
        }
    }
    b
}

fn signed_distance_transform_bool(mask: &Grid<bool>) -> Grid<f64> {
    let boundary = boundary_map(mask);
    if boundary.count_true() == 0 {
        // no buildings anywhere: every pixel sits at the clamp limit
        return Grid::filled(mask.height(), mask.width(), f64::from(CLASS_MIN));
    }
    let sq = squared_edt(&boundary);
    let mut out = Grid::filled(mask.height(), mask.width(), 0.0);
    for (r, c, d2) in sq.iter() {
        let d = d2.sqrt();
        out.set(r, c, if mask.get(r, c) { d } else { -d });
    }
    out
}

/// Signed Euclidean distance to the building boundary for a 0/1 map.
///
/// Positive inside buildings, exactly zero on boundary pixels, negative
/// outside; every value is `-64` when the mask has no buildings at all.
pub fn signed_distance_transform(mask: &Grid<f64>) -> Result<Grid<f64>> {
    for (r, c, v) in mask.iter() {
        if v != 0.0 && v != 1.0 {
            return Err(Error::invalid(format!(
                "mask must be 0/1 valued, found {} at ({}, {})",
                v, r, c
            )));
        }
    }
    Ok(signed_distance_transform_bool(&mask.map(|v| v == 1.0)))
}

/// Rounds half away from zero, then clamps to `[-64, 63]`.
pub fn quantize(values: &Grid<f64>) -> Grid<i8> {
    values.map(|v| {
        // f64::round rounds half away from zero
        let q = v.round();
        q.max(f64::from(CLASS_MIN)).min(f64::from(CLASS_MAX)) as i8
    })
}

/// Probability-weighted sum of the class values `k - 64` per pixel.
///
/// Rejects inputs whose channel mass is negative or deviates from 1 by more
/// than 1e-6.
pub fn expectation_decode<E: Element>(probs: &Tensor<E>) -> Result<Grid<f64>> {
    let (h, w, k) = probs.dims3()?;
    if k != NUM_CLASSES {
        return Err(Error::shape(format!(
            "expectation decode expects {} channels, got {}",
            NUM_CLASSES, k
        )));
    }
    let mut out = Grid::filled(h, w, 0.0);
    for r in 0..h {
        for c in 0..w {
            let px = &probs.data()[(r * w + c) * k..(r * w + c) * k + k];
            let mut sum = 0.0f64;
            let mut acc = 0.0f64;
            for (i, &p) in px.iter().enumerate() {
                let p = p.as_f64();
                if p < 0.0 {
                    return Err(Error::invalid(format!(
                        "negative probability {} at ({}, {}) channel {}",
                        p, r, c, i
                    )));
                }
                sum += p;
                acc += p * (i as f64 + f64::from(CLASS_MIN));
            }
            if (sum - 1.0).abs() > 1e-6 {
                return Err(Error::invalid(format!(
                    "channel mass {} at ({}, {}) is not normalized",
                    sum, r, c
                )));
            }
            out.set(r, c, acc);
        }
    }
    Ok(out)
}

/// Thresholded readout of a decoded distance field: building pixels have
/// values above 0.5, boundary pixels lie in `[-0.5, 0.5]`.
pub fn threshold_readout(values: &Grid<f64>) -> (Grid<bool>, Grid<bool>) {
    let building = values.map(|v| v > 0.5);
    let boundary = values.map(|v| (-0.5..=0.5).contains(&v));
    (building, boundary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::check::brute_force_sdt;

    fn mask_from(rows: &[&str]) -> Grid<bool> {
        let h = rows.len();
        let w = rows[0].len();
        let data = rows
            .iter()
            .flat_map(|r| r.chars().map(|ch| ch == '#'))
            .collect();
        Grid::from_vec(h, w, data).unwrap()
    }

    #[test]
    fn all_zero_mask_goes_to_clamp_limit() {
        let mask = Grid::filled(4, 4, 0.0f64);
        let sdt = signed_distance_transform(&mask).unwrap();
        assert!(sdt.data().iter().all(|&v| v == -64.0));
    }

    #[test]
    fn rejects_non_binary_mask() {
        let mut mask = Grid::filled(2, 2, 0.0f64);
        mask.set(0, 0, 0.5);
        assert!(signed_distance_transform(&mask).is_err());
    }

    #[test]
    fn single_pixel_distances() {
        let mask = mask_from(&[".....", ".....", "..#..", ".....", "....."]);
        let sdt = signed_distance_transform_bool(&mask);
        assert_eq!(sdt.get(2, 2), 0.0);
        assert_eq!(sdt.get(1, 2), -1.0);
        assert_eq!(sdt.get(2, 1), -1.0);
        assert_eq!(sdt.get(3, 2), -1.0);
        assert_eq!(sdt.get(2, 3), -1.0);
        assert_eq!(sdt.get(1, 1), -(2.0f64.sqrt()));
        assert_eq!(sdt.get(3, 3), -(2.0f64.sqrt()));
    }

    #[test]
    fn solid_block_interior_is_positive() {
        let mask = mask_from(&[
            ".......", ".......", "..###..", "..###..", "..###..", ".......", ".......",
        ]);
        let sdt = signed_distance_transform_bool(&mask);
        // the 8 ring pixels of the block are boundary
        for (r, c) in [
            (2, 2),
            (2, 3),
            (2, 4),
            (3, 2),
            (3, 4),
            (4, 2),
            (4, 3),
            (4, 4),
        ] {
            assert_eq!(sdt.get(r, c), 0.0, "({}, {})", r, c);
        }
        assert_eq!(sdt.get(3, 3), 1.0);
        assert_eq!(sdt.get(1, 3), -1.0);
        assert_eq!(sdt.get(3, 1), -1.0);
        assert_eq!(sdt.get(5, 3), -1.0);
        assert_eq!(sdt.get(3, 5), -1.0);
    }

    #[test]
    fn matches_brute_force_on_randomish_masks() {
        for seed in 0..20u64 {
            let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(1);
            let mut next = || {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                state
            };
            let h = 3 + (next() % 14) as usize;
            let w = 3 + (next() % 14) as usize;
            let data: Vec<bool> = (0..h * w).map(|_| next() % 3 == 0).collect();
            let mask = Grid::from_vec(h, w, data).unwrap();
            let got = signed_distance_transform_bool(&mask);
            let want = brute_force_sdt(&mask);
            assert_eq!(got, want, "seed {}", seed);
        }
    }

    #[test]
    fn full_mask_edges_are_boundary() {
        let mask = Grid::filled(5, 5, true);
        let sdt = signed_distance_transform_bool(&mask);
        assert_eq!(sdt.get(0, 0), 0.0);
        assert_eq!(sdt.get(0, 3), 0.0);
        assert_eq!(sdt.get(2, 2), 2.0);
        assert!(sdt.data().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn quantize_rounds_half_away_and_clamps() {
        let vals = Grid::from_vec(1, 5, vec![0.4, 200.0, -200.0, -0.5, 0.5]).unwrap();
        let q = quantize(&vals);
        assert_eq!(q.data(), &[0, 63, -64, -1, 1]);
    }

    #[test]
    fn quantize_idempotent_on_integer_maps_in_range() {
        let vals = Grid::from_vec(1, 4, vec![-64.0, -1.0, 0.0, 63.0]).unwrap();
        let q = quantize(&vals);
        let again = quantize(&q.map(f64::from));
        assert_eq!(q, again);
    }

    #[test]
    fn decode_one_hot_recovers_class_value() {
        let mut probs = Tensor::<f64>::zeros(&[1, 1, 128]);
        probs.data_mut()[74] = 1.0;
        let vals = expectation_decode(&probs).unwrap();
        assert_eq!(vals.get(0, 0), 10.0);
    }

    #[test]
    fn decode_uniform_distribution_gives_mean() {
        let probs = Tensor::<f64>::filled(&[1, 1, 128], 1.0 / 128.0);
        let vals = expectation_decode(&probs).unwrap();
        assert!((vals.get(0, 0) - (-0.5)).abs() < 1e-12);
    }

    #[test]
    fn decode_two_point_mixture() {
        let mut probs = Tensor::<f64>::zeros(&[1, 1, 128]);
        probs.data_mut()[64] = 0.5;
        probs.data_mut()[84] = 0.5;
        let vals = expectation_decode(&probs).unwrap();
        assert!((vals.get(0, 0) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn decode_rejects_unnormalized_input() {
        let probs = Tensor::<f64>::filled(&[1, 1, 128], 0.5);
        assert!(expectation_decode(&probs).is_err());
    }

    #[test]
    fn decode_after_quantize_one_hot_is_identity() {
        // every in-range integer class survives the round trip exactly
        let vals = Grid::from_vec(8, 16, (0..128).map(|k| (k - 64) as f64).collect()).unwrap();
        let classes = quantize(&vals);
        let mut probs = Tensor::<f64>::zeros(&[8, 16, 128]);
        for (r, c, cls) in classes.iter() {
            let idx = (cls as i32 + 64) as usize;
            probs.data_mut()[(r * 16 + c) * 128 + idx] = 1.0;
        }
        let decoded = expectation_decode(&probs).unwrap();
        assert_eq!(decoded, vals);
    }

    #[test]
    fn threshold_bands() {
        let vals = Grid::from_vec(1, 5, vec![0.6, 0.0, -3.0, 0.5, -0.5]).unwrap();
        let (building, boundary) = threshold_readout(&vals);
        assert_eq!(building.data(), &[true, false, false, false, false]);
        assert_eq!(boundary.data(), &[false, true, false, true, true]);
    }

    #[test]
    fn readout_of_exact_sdt_recovers_interior() {
        let mask = mask_from(&[
            "........", ".######.", ".######.", ".######.", ".######.", "........", "........",
            "........",
        ]);
        let field = LabelField::from_mask(&mask);
        let (building, _) = threshold_readout(field.values());
        for (r, c, b) in building.iter() {
            let is_interior = mask.get(r, c) && field.values().get(r, c) >= 1.0;
            assert_eq!(b, is_interior, "({}, {})", r, c);
        }
        // interior pixels (distance >= 1) are all recovered
        assert!(building.count_true() > 0);
    }

    #[test]
    fn class_indices_shift_into_unsigned_range() {
        let mask = mask_from(&["....", ".##.", ".##.", "...."]);
        let field = LabelField::from_mask(&mask);
        for (_, _, idx) in field.class_indices().iter() {
            assert!((idx as usize) < NUM_CLASSES);
        }
    }
}
