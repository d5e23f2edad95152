//! Bilinear upsampling as zero-stuffing plus separable triangle-filter
//! convolution, and its exact adjoint.
//!
//! Inserting `n` zeros between samples and convolving with the symmetric
//! `2n + 1` tap triangle filter reproduces inverse-distance interpolation at
//! every interior point while leaving the original samples untouched. The
//! pure stuff-and-convolve result has `(len - 1) * factor + 1` samples per
//! axis; the final row/column is replicated `factor - 1` times so stage maps
//! stack to exactly `len * factor`, which keeps the fusion head's extents
//! aligned. The adjoint folds the replicated border back, convolves with the
//! same filter, and keeps every `factor`-th sample.

use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor};

/// Triangle interpolation filter for `n` inserted points between samples.
#[derive(Clone, Debug, PartialEq)]
pub struct InterpFilter {
    n: usize,
    taps: Vec<f64>,
}

impl InterpFilter {
    pub fn insertion_count(&self) -> usize {
        self.n
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }
}

/// Builds the `2n + 1` tap filter `[1/(n+1), 2/(n+1), ..., 1, ..., 1/(n+1)]`.
pub fn make_interp_filter(n: usize) -> InterpFilter {
    let f = (n + 1) as f64;
    let taps = (0..2 * n + 1)
        .map(|i| {
            let k = if i <= n { i + 1 } else { 2 * n + 1 - i };
            k as f64 / f
        })
        .collect();
    InterpFilter { n, taps }
}

/// One axis pass: zero-stuff `factor - 1` zeros between consecutive samples
/// and convolve with the triangle filter (same-zero padding). `stride` is
/// the element distance between consecutive samples along the axis, `len`
/// the sample count. Writes `(len - 1) * factor + 1` outputs starting at
/// the head of `dst`.
fn axis_interp<E: Element>(
    src: &[E],
    len: usize,
    stride: usize,
    factor: usize,
    taps: &[E],
    dst: &mut [E],
    dst_stride: usize,
) {
    let n = factor - 1;
    let core = (len - 1) * factor + 1;
    for i in 0..core {
        let mut acc = E::zero();
        // stuffed[j] = src[j / factor] when j % factor == 0, else 0
        for (t, &tap) in taps.iter().enumerate() {
            let j = i as isize + t as isize - n as isize;
            if j < 0 || j >= core as isize {
                continue;
            }
            let j = j as usize;
            if j.is_multiple_of(factor) {
                acc = acc + tap * src[(j / factor) * stride];
            }
        }
        dst[i * dst_stride] = acc;
    }
}

/// Upsamples an HxWxC map by an integer factor via the filter of
/// [`make_interp_filter`], then replicates the final computed row/column so
/// the output extents are exactly `H * factor` by `W * factor`.
pub fn upsample_bilinear<E: Element>(map: &Tensor<E>, factor: usize) -> Result<Tensor<E>> {
    if factor < 1 {
        return Err(Error::invalid("upsample factor must be >= 1".to_string()));
    }
    let (h, w, c) = map.dims3()?;
    if factor == 1 {
        return Ok(map.clone());
    }
    if h == 0 || w == 0 {
        return Err(Error::shape("cannot upsample an empty map".to_string()));
    }
    let taps: Vec<E> = make_interp_filter(factor - 1)
        .taps()
        .iter()
        .map(|&t| E::from_f64(t))
        .collect();

    let core_h = (h - 1) * factor + 1;
    let core_w = (w - 1) * factor + 1;
    let (out_h, out_w) = (h * factor, w * factor);

    // vertical pass into a core_h x w x c buffer
    let mut vert = Tensor::<E>::zeros(&[core_h, w, c]);
    {
        let dst = vert.data_mut();
        for col in 0..w {
            for ch in 0..c {
                axis_interp(
                    &map.data()[col * c + ch..],
                    h,
                    w * c,
                    factor,
                    &taps,
                    &mut dst[col * c + ch..],
                    w * c,
                )
            }
        }
    }

    // horizontal pass + edge replication into the final buffer
    let mut out = Tensor::<E>::zeros(&[out_h, out_w, c]);
    {
        let dst = out.data_mut();
        let src = vert.data();
        for row in 0..core_h {
            for ch in 0..c {
                axis_interp(
                    &src[row * w * c + ch..],
                    w,
                    c,
                    factor,
                    &taps,
                    &mut dst[row * out_w * c + ch..],
                    c,
                )
            }
            // replicate the last computed column
            let row_base = row * out_w * c;
            for col in core_w..out_w {
                for ch in 0..c {
                    dst[row_base + col * c + ch] = dst[row_base + (core_w - 1) * c + ch];
                }
            }
        }
        // replicate the last computed row
        for row in core_h..out_h {
            let (done, todo) = dst.split_at_mut(row * out_w * c);
            todo[..out_w * c].copy_from_slice(&done[(core_h - 1) * out_w * c..core_h * out_w * c]);
        }
    }
    Ok(out)
}

/// One axis pass of the adjoint: same-zero convolution with the (symmetric)
/// triangle filter followed by keeping every `factor`-th sample, which is
/// the exact adjoint of stuff-then-convolve. `len` is the upstream sample
/// count along the axis; writes `(len - 1) / factor + 1` outputs starting
/// at the head of `dst`.
fn axis_interp_adjoint<E: Element>(
    src: &[E],
    len: usize,
    stride: usize,
    factor: usize,
    taps: &[E],
    dst: &mut [E],
    dst_stride: usize,
) {
    let n = factor - 1;
    let out_len = (len - 1) / factor + 1;
    for q in 0..out_len {
        let center = q * factor;
        let mut acc = E::zero();
        for (t, &tap) in taps.iter().enumerate() {
            let j = center as isize + t as isize - n as isize;
            if j < 0 || j >= len as isize {
                continue;
            }
            acc = acc + tap * src[j as usize * stride];
        }
        dst[q * dst_stride] = acc;
    }
}

/// Exact adjoint of [`upsample_bilinear`] for the same factor. The upstream
/// extents must be multiples of the factor.
pub fn upsample_vjp<E: Element>(upstream: &Tensor<E>, factor: usize) -> Result<Tensor<E>> {
    if factor < 1 {
        return Err(Error::invalid("upsample factor must be >= 1".to_string()));
    }
    let (uh, uw, c) = upstream.dims3()?;
    if factor == 1 {
        return Ok(upstream.clone());
    }
    if uh % factor != 0 || uw % factor != 0 || uh == 0 || uw == 0 {
        return Err(Error::shape(format!(
            "upstream extents {}x{} not divisible by factor {}",
            uh, uw, factor
        )));
    }
    let (h, w) = (uh / factor, uw / factor);
    let core_h = (h - 1) * factor + 1;
    let core_w = (w - 1) * factor + 1;
    let taps: Vec<E> = make_interp_filter(factor - 1)
        .taps()
        .iter()
        .map(|&t| E::from_f64(t))
        .collect();

    // fold the replicated rows/columns back onto the last computed ones
    let mut folded = Tensor::<E>::zeros(&[core_h, core_w, c]);
    {
        let dst = folded.data_mut();
        let src = upstream.data();
        for r in 0..uh {
            let fr = r.min(core_h - 1);
            for col in 0..uw {
                let fc = col.min(core_w - 1);
                for ch in 0..c {
                    let d = (fr * core_w + fc) * c + ch;
                    dst[d] = dst[d] + src[(r * uw + col) * c + ch];
                }
            }
        }
    }

    // horizontal adjoint pass: core_h x core_w -> core_h x w
    let mut horiz = Tensor::<E>::zeros(&[core_h, w, c]);
    {
        let dst = horiz.data_mut();
        let src = folded.data();
        for row in 0..core_h {
            for ch in 0..c {
                axis_interp_adjoint(
                    &src[row * core_w * c + ch..],
                    core_w,
                    c,
                    factor,
                    &taps,
                    &mut dst[row * w * c + ch..],
                    c,
                );
            }
        }
    }

    // vertical adjoint pass: core_h x w -> h x w
    let mut grad = Tensor::<E>::zeros(&[h, w, c]);
    {
        let dst = grad.data_mut();
        let src = horiz.data();
        for col in 0..w {
            for ch in 0..c {
                axis_interp_adjoint(
                    &src[col * c + ch..],
                    core_h,
                    w * c,
                    factor,
                    &taps,
                    &mut dst[col * c + ch..],
                    w * c,
                );
            }
        }
    }
    Ok(grad)
}
