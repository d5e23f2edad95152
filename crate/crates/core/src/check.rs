//! Independent reference routines for verification.
//!
//! Everything in this module trades speed for obvious correctness: central
//! finite differences, direct inverse-distance interpolation, brute-force
//! nearest-boundary search, per-point polygon membership and explicit
//! receptive-field connectivity tracing. Test suites compare the production
//! paths against these; none of the production code calls into here.

use crate::grid::Grid;
use crate::tensor::Tensor;

/// Central finite-difference gradient of a scalar objective at `x`.
pub fn finite_difference<F>(x: &Tensor<f64>, mut objective: F, step: f64) -> Tensor<f64>
where
    F: FnMut(&Tensor<f64>) -> f64,
{
    let mut grad = Tensor::zeros(x.shape());
    let mut probe = x.clone();
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + step;
        let fp = objective(&probe);
        probe.data_mut()[i] = orig - step;
        let fm = objective(&probe);
        probe.data_mut()[i] = orig;
        grad.data_mut()[i] = (fp - fm) / (2.0 * step);
    }
    grad
}

/// Relative error between two gradient values with a floor that keeps
/// near-zero coordinates from amplifying finite-difference noise.
pub fn grad_rel_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(1e-3);
    (analytic - numeric).abs() / denom
}

/// Panics when any coordinate pair differs by more than `tol` relative
/// error.
pub fn assert_grads_close(analytic: &[f64], numeric: &[f64], tol: f64) {
    assert_eq!(analytic.len(), numeric.len(), "gradient length mismatch");
    let mut worst = 0.0f64;
    let mut worst_idx = 0usize;
    for (i, (&a, &n)) in analytic.iter().zip(numeric.iter()).enumerate() {
        let e = grad_rel_error(a, n);
        if e > worst {
            worst = e;
            worst_idx = i;
        }
    }
    assert!(
        worst < tol,
        "gradient mismatch at index {}: analytic {} vs numeric {} (rel {:.3e}, tol {:.1e})",
        worst_idx,
        analytic[worst_idx],
        numeric[worst_idx],
        worst,
        tol
    );
}

/// Direct inverse-distance interpolation of a 1-D signal upsampled by an
/// integer factor. Produces the `(len - 1) * factor + 1` interior samples:
/// originals at multiples of `factor`, each gap filled with the two-point
/// weighted mean.
pub fn direct_linear_interp(signal: &[f64], factor: usize) -> Vec<f64> {
    assert!(factor >= 1 && !signal.is_empty());
    let n = (signal.len() - 1) * factor + 1;
    let mut out = vec![0.0; n];
    for (i, o) in out.iter_mut().enumerate() {
        let q = i / factor;
        let s = i % factor;
        *o = if s == 0 {
            signal[q]
        } else {
            let t = s as f64 / factor as f64;
            (1.0 - t) * signal[q] + t * signal[q + 1]
        };
    }
    out
}

/// Brute-force signed distance transform: for every pixel, scan the entire
/// boundary set for the nearest member. Quadratic and exact.
///
/// Matches the production convention: the boundary is the set of building
/// pixels with a 4-adjacent background pixel or on the image edge; positive
/// inside, zero on the boundary, negative outside, all -64 when the boundary
/// is empty.
pub fn brute_force_sdt(mask: &Grid<bool>) -> Grid<f64> {
    let (h, w) = (mask.height(), mask.width());
    let mut boundary = Vec::new();
    for r in 0..h {
        for c in 0..w {
            if !mask.get(r, c) {
                continue;
            }
            let on_edge = r == 0 || c == 0 || r == h - 1 || c == w - 1;
            let has_bg_neighbor = (r > 0 && !mask.get(r - 1, c))
                || (r + 1 < h && !mask.get(r + 1, c))
                || (c > 0 && !mask.get(r, c - 1))
                || (c + 1 < w && !mask.get(r, c + 1));
            if on_edge || has_bg_neighbor {
                boundary.push((r, c));
            }
        }
    }
    if boundary.is_empty() {
        return Grid::filled(h, w, -64.0);
    }
    let mut out = Grid::filled(h, w, 0.0);
    for r in 0..h {
        for c in 0..w {
            let mut best = u64::MAX;
            for &(br, bc) in &boundary {
                let dr = r as i64 - br as i64;
                let dc = c as i64 - bc as i64;
                let d2 = (dr * dr + dc * dc) as u64;
                if d2 < best {
                    best = d2;
                }
            }
            let d = (best as f64).sqrt();
            out.set(r, c, if mask.get(r, c) { d } else { -d });
        }
    }
    out
}

/// Even-odd membership test for a single point, written independently of
/// the scanline rasterizer. Points exactly on an edge count as inside.
pub fn point_in_polygon_reference(x: f64, y: f64, vertices: &[(f64, f64)]) -> bool {
    let n = vertices.len();
    // on-edge check first
    for i in 0..n {
        let (x1, y1) = vertices[i];
        let (x2, y2) = vertices[(i + 1) % n];
        let cross = (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1);
        if cross == 0.0 {
            let dot = (x - x1) * (x2 - x1) + (y - y1) * (y2 - y1);
            let len2 = (x2 - x1) * (x2 - x1) + (y2 - y1) * (y2 - y1);
            if dot >= 0.0 && dot <= len2 && len2 > 0.0 {
                return true;
            }
        }
    }
    let mut inside = false;
    for i in 0..n {
        let (x1, y1) = vertices[i];
        let (x2, y2) = vertices[(i + 1) % n];
        if (y1 > y) != (y2 > y) {
            let xi = x1 + (y - y1) / (y2 - y1) * (x2 - x1);
            if x < xi {
                inside = !inside;
            }
        }
    }
    inside
}

/// Receptive-field size by explicit connectivity tracing on a 1-D network,
/// independent of the closed-form recurrence.
///
/// Builds the concrete layer chain for `(filter_size, pool)` stages over a
/// wide input, then walks per-unit influence sets backwards: a valid-
/// convolution output unit `u` connects to inputs `u .. u + s - 1`, a
/// pooling output unit `u` to `u * p .. u * p + p - 1`. Returns the number
/// of input units that reach the first unit of the last layer.
pub fn trace_receptive_field(stages: &[(usize, usize)]) -> usize {
    enum Layer {
        Conv(usize),
        Pool(usize),
    }
    let mut layers = Vec::new();
    for &(s, p) in stages {
        layers.push(Layer::Conv(s));
        if p > 1 {
            layers.push(Layer::Pool(p));
        }
    }
    let input_units = 1024usize;
    let mut sizes = vec![input_units];
    for layer in &layers {
        let cur = *sizes.last().unwrap();
        let next = match layer {
            Layer::Conv(s) => cur - (s - 1),
            Layer::Pool(p) => cur / p,
        };
        assert!(next >= 1, "network too deep for the traced input width");
        sizes.push(next);
    }

    let mut influenced = vec![false; *sizes.last().unwrap()];
    influenced[0] = true;
    for k in (0..layers.len()).rev() {
        let mut prev = vec![false; sizes[k]];
        for (u, &on) in influenced.iter().enumerate() {
            if !on {
                continue;
            }
            match layers[k] {
                Layer::Conv(s) => {
                    for d in 0..s {
                        prev[u + d] = true;
                    }
                }
                Layer::Pool(p) => {
                    for d in 0..p {
                        prev[u * p + d] = true;
                    }
                }
            }
        }
        influenced = prev;
    }
    influenced.iter().filter(|&&b| b).count()
}
