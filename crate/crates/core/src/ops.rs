//! Differentiable layer primitives: 2-D convolution, 2x2 max-pooling, ReLU
//! and per-pixel softmax cross-entropy, each with an explicit adjoint.
//!
//! Everything here is a pure function of its inputs. The backward ops return
//! exact partial derivatives of `sum(upstream * forward(input))`; they are
//! checked against central finite differences in the test suite. Row-level
//! parallelism keeps results bitwise independent of worker count: every
//! output element is produced by exactly one task with a fixed-order inner
//! sum.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::tensor::{dot, ConvParams, Element, Padding, Tensor};
use rayon::prelude::*;

struct ConvGeometry {
    h: usize,
    w: usize,
    cin: usize,
    count: usize,
    kh: usize,
    kw: usize,
    oh: usize,
    ow: usize,
    /// Input-coordinate offset of the window origin relative to the output
    /// position (kernel half-extent for same-zero, 0 for valid).
    r_off: isize,
    c_off: isize,
}

fn conv_geometry<E: Element>(input: &Tensor<E>, p: &ConvParams<E>) -> Result<ConvGeometry> {
    let (h, w, cin) = input.dims3()?;
    if h == 0 || w == 0 {
        return Err(Error::shape("input extents must be positive".to_string()));
    }
    let (count, kh, kw, fcin) = p.filters.dims4()?;
    if cin != fcin {
        return Err(Error::shape(format!(
            "input has {} channels but filters expect {}",
            cin, fcin
        )));
    }
    let (oh, ow, r_off, c_off) = match p.padding {
        Padding::SameZero => (h, w, (kh as isize - 1) / 2, (kw as isize - 1) / 2),
        Padding::Valid => {
            if h < kh || w < kw {
                return Err(Error::shape(format!(
                    "valid padding needs input {}x{} >= kernel {}x{}",
                    h, w, kh, kw
                )));
            }
            (h - kh + 1, w - kw + 1, 0, 0)
        }
    };
    Ok(ConvGeometry {
        h,
        w,
        cin,
        count,
        kh,
        kw,
        oh,
        ow,
        r_off,
        c_off,
    })
}

/// 2-D convolution of an HxWxCin input with a bank of filters.
///
/// Each output value is the dot product of one filter with the co-located
/// input window (zero-extended under same-zero padding) plus that filter's
/// bias.
pub fn conv2d<E: Element>(input: &Tensor<E>, p: &ConvParams<E>) -> Result<Tensor<E>> {
    let ConvGeometry {
        h,
        w,
        cin,
        count,
        kh,
        kw,
        oh,
        ow,
        r_off,
        c_off,
    } = conv_geometry(input, p)?;

    let in_data = input.data();
    let w_data = p.filters.data();
    let bias = p.bias.data();
    let in_row = w * cin; // elements per input row
    let f_len = kh * kw * cin; // elements per filter
    let f_row = kw * cin; // elements per filter row

    let mut out = Tensor::zeros(&[oh, ow, count]);
    out.data_mut()
        .par_chunks_mut(ow * count)
        .enumerate()
        .for_each(|(r, out_row)| {
            for c in 0..ow {
                // Window rows/cols in input coordinates, clipped to the image.
                let r0 = r as isize - r_off;
                let c0 = c as isize - c_off;
                let i_lo = (-r0).max(0) as usize;
                let i_hi = kh.min((h as isize - r0).max(0) as usize);
                let j_lo = (-c0).max(0) as usize;
                let j_hi = kw.min((w as isize - c0).max(0) as usize);
                let span = (j_hi - j_lo) * cin;
                let out_px = &mut out_row[c * count..(c + 1) * count];
                for (f, o) in out_px.iter_mut().enumerate() {
                    let mut acc = bias[f];
                    let f_base = f * f_len;
                    for i in i_lo..i_hi {
                        let rr = (r0 + i as isize) as usize;
                        let in_base = rr * in_row + ((c0 + j_lo as isize) as usize) * cin;
                        let w_base = f_base + i * f_row + j_lo * cin;
                        acc = acc
                            + dot(
                                &in_data[in_base..in_base + span],
                                &w_data[w_base..w_base + span],
                            );
                    }
                    *o = acc;
                }
            }
        });
    Ok(out)
}

/// Vector-Jacobian product of [`conv2d`]: exact partial derivatives of
/// `sum(upstream * conv2d(input, p))` with respect to input, filters and
/// bias.
pub fn conv2d_vjp<E: Element>(
    input: &Tensor<E>,
    p: &ConvParams<E>,
    upstream: &Tensor<E>,
) -> Result<(Tensor<E>, Tensor<E>, Tensor<E>)> {
    let ConvGeometry {
        h,
        w,
        cin,
        count,
        kh,
        kw,
        oh,
        ow,
        r_off,
        c_off,
    } = conv_geometry(input, p)?;
    if upstream.shape() != [oh, ow, count] {
        return Err(Error::shape(format!(
            "upstream shape {:?} does not match conv output [{}, {}, {}]",
            upstream.shape(),
            oh,
            ow,
            count
        )));
    }

    let in_data = input.data();
    let w_data = p.filters.data();
    let up = upstream.data();
    let in_row = w * cin;
    let up_row = ow * count;
    let f_len = kh * kw * cin;
    let f_row = kw * cin;

    // grad_bias[f] = sum of upstream over positions; independent per filter.
    let mut grad_bias = Tensor::zeros(&[count]);
    for (f, g) in grad_bias.data_mut().iter_mut().enumerate() {
        let mut acc = E::zero();
        for pos in 0..oh * ow {
            acc = acc + up[pos * count + f];
        }
        *g = acc;
    }

    // grad_filters: each filter's gradient only reads its own upstream
    // channel, so filters parallelize cleanly.
    let mut grad_filters = Tensor::zeros(&[count, kh, kw, cin]);
    grad_filters
        .data_mut()
        .par_chunks_mut(f_len)
        .enumerate()
        .for_each(|(f, gw)| {
            for r in 0..oh {
                let r0 = r as isize - r_off;
                let i_lo = (-r0).max(0) as usize;
                let i_hi = kh.min((h as isize - r0).max(0) as usize);
                for c in 0..ow {
                    let uval = up[r * up_row + c * count + f];
                    if uval == E::zero() {
                        continue;
                    }
                    let c0 = c as isize - c_off;
                    let j_lo = (-c0).max(0) as usize;
                    let j_hi = kw.min((w as isize - c0).max(0) as usize);
                    let span = (j_hi - j_lo) * cin;
                    for i in i_lo..i_hi {
                        let rr = (r0 + i as isize) as usize;
                        let in_base = rr * in_row + ((c0 + j_lo as isize) as usize) * cin;
                        let w_base = i * f_row + j_lo * cin;
                        let dst = &mut gw[w_base..w_base + span];
                        let src = &in_data[in_base..in_base + span];
                        for (d, s) in dst.iter_mut().zip(src.iter()) {
                            *d = *d + uval * *s;
                        }
                    }
                }
            }
        });

    // grad_input in gather form: every input row is written by one task.
    let mut grad_input = Tensor::zeros(&[h, w, cin]);
    grad_input
        .data_mut()
        .par_chunks_mut(in_row)
        .enumerate()
        .for_each(|(y, grow)| {
            for x in 0..w {
                let gpix = &mut grow[x * cin..(x + 1) * cin];
                for i in 0..kh {
                    // Output row r satisfies y = r - r_off + i.
                    let r = y as isize + r_off - i as isize;
                    if r < 0 || r >= oh as isize {
                        continue;
                    }
                    for j in 0..kw {
                        let c = x as isize + c_off - j as isize;
                        if c < 0 || c >= ow as isize {
                            continue;
                        }
                        let up_base = r as usize * up_row + c as usize * count;
                        let w_base = i * f_row + j * cin;
                        for f in 0..count {
                            let uval = up[up_base + f];
                            if uval == E::zero() {
                                continue;
                            }
                            let wrow = &w_data[f * f_len + w_base..f * f_len + w_base + cin];
                            for (g, wv) in gpix.iter_mut().zip(wrow.iter()) {
                                *g = *g + uval * *wv;
                            }
                        }
                    }
                }
            }
        });

    Ok((grad_input, grad_filters, grad_bias))
}

/// Winning positions recorded by [`maxpool2`], used to route gradients back.
#[derive(Clone, Debug)]
pub struct PoolArgmax {
    in_height: usize,
    in_width: usize,
    channels: usize,
    /// Flat input index of the window maximum, per output element.
    indices: Vec<usize>,
}

impl PoolArgmax {
    pub fn out_height(&self) -> usize {
        self.in_height / 2
    }
    pub fn out_width(&self) -> usize {
        self.in_width / 2
    }
    pub fn channels(&self) -> usize {
        self.channels
    }
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }
}

/// Non-overlapping 2x2 max-pooling. A trailing odd row/column is dropped.
/// Ties go to the first position in row-major window scan order.
pub fn maxpool2<E: Element>(input: &Tensor<E>) -> Result<(Tensor<E>, PoolArgmax)> {
    let (h, w, c) = input.dims3()?;
    if h < 2 || w < 2 {
        return Err(Error::shape(format!(
            "maxpool2 needs extents >= 2, got {}x{}",
            h, w
        )));
    }
    let (oh, ow) = (h / 2, w / 2);
    let in_data = input.data();
    let in_row = w * c;
    let mut out = Tensor::zeros(&[oh, ow, c]);
    let mut indices = vec![0usize; oh * ow * c];

    for r in 0..oh {
        for cc in 0..ow {
            for ch in 0..c {
                let mut best_idx = (2 * r) * in_row + (2 * cc) * c + ch;
                let mut best = in_data[best_idx];
                // Row-major scan of the 2x2 window; strict > keeps the first
                // occurrence on ties.
                for (dr, dc) in [(0usize, 1usize), (1, 0), (1, 1)] {
                    let idx = (2 * r + dr) * in_row + (2 * cc + dc) * c + ch;
                    if in_data[idx] > best {
                        best = in_data[idx];
                        best_idx = idx;
                    }
                }
                let o = (r * ow + cc) * c + ch;
                out.data_mut()[o] = best;
                indices[o] = best_idx;
            }
        }
    }
    Ok((
        out,
        PoolArgmax {
            in_height: h,
            in_width: w,
            channels: c,
            indices,
        },
    ))
}

/// Adjoint of [`maxpool2`]: routes each upstream value to its recorded
/// argmax position, zero elsewhere.
pub fn maxpool2_vjp<E: Element>(argmax: &PoolArgmax, upstream: &Tensor<E>) -> Result<Tensor<E>> {
    let expected = [argmax.out_height(), argmax.out_width(), argmax.channels];
    if upstream.shape() != expected {
        return Err(Error::shape(format!(
            "upstream shape {:?} does not match pooled shape {:?}",
            upstream.shape(),
            expected
        )));
    }
    let mut grad = Tensor::zeros(&[argmax.in_height, argmax.in_width, argmax.channels]);
    let g = grad.data_mut();
    for (o, &idx) in argmax.indices.iter().enumerate() {
        g[idx] = g[idx] + upstream.data()[o];
    }
    Ok(grad)
}

/// Elementwise `max(0, x)`.
pub fn relu<E: Element>(input: &Tensor<E>) -> Tensor<E> {
    let mut out = input.clone();
    for v in out.data_mut() {
        if *v < E::zero() {
            *v = E::zero();
        }
    }
    out
}

/// Adjoint of [`relu`]: passes upstream where the input was strictly
/// positive, zero where it was <= 0.
pub fn relu_vjp<E: Element>(input: &Tensor<E>, upstream: &Tensor<E>) -> Result<Tensor<E>> {
    if input.shape() != upstream.shape() {
        return Err(Error::shape(format!(
            "relu_vjp shapes differ: {:?} vs {:?}",
            input.shape(),
            upstream.shape()
        )));
    }
    let mut grad = upstream.clone();
    for (g, x) in grad.data_mut().iter_mut().zip(input.data()) {
        if *x <= E::zero() {
            *g = E::zero();
        }
    }
    Ok(grad)
}

/// Per-pixel softmax over the channel axis followed by cross-entropy against
/// integer labels.
///
/// Returns the mean over pixels of `-log p[label]` and the gradient of that
/// loss with respect to the logits, `(softmax - onehot) / pixel_count`.
pub fn pixel_softmax_xent<E: Element>(
    logits: &Tensor<E>,
    labels: &Grid<u8>,
) -> Result<(f64, Tensor<E>)> {
    let (h, w, k) = logits.dims3()?;
    if h == 0 || w == 0 || k == 0 {
        return Err(Error::shape("logit extents must be positive".to_string()));
    }
    if labels.height() != h || labels.width() != w {
        return Err(Error::shape(format!(
            "labels {}x{} do not match logits {}x{}",
            labels.height(),
            labels.width(),
            h,
            w
        )));
    }
    for (r, c, l) in labels.iter() {
        if (l as usize) >= k {
            return Err(Error::invalid(format!(
                "label {} at ({}, {}) out of range [0, {})",
                l, r, c, k
            )));
        }
    }

    let npix = h * w;
    let inv_n = E::from_f64(1.0 / npix as f64);
    let mut grad = Tensor::zeros(&[h, w, k]);
    let data = logits.data();
    let labels_flat: Vec<u8> = labels.data().to_vec();

    // One task per pixel row; loss accumulated per row then reduced in a
    // fixed order.
    let row_losses: Vec<f64> = grad
        .data_mut()
        .par_chunks_mut(w * k)
        .enumerate()
        .map(|(r, grow)| {
            let mut row_loss = 0.0f64;
            for c in 0..w {
                let px = &data[(r * w + c) * k..(r * w + c) * k + k];
                let gpx = &mut grow[c * k..(c + 1) * k];
                let mut m = px[0];
                for &v in &px[1..] {
                    if v > m {
                        m = v;
                    }
                }
                let mut z = E::zero();
                for (g, &v) in gpx.iter_mut().zip(px.iter()) {
                    let e = (v - m).exp();
                    *g = e;
                    z = z + e;
                }
                let label = labels_flat[r * w + c] as usize;
                // log-sum-exp for stability; clamp only true negatives so
                // a non-finite loss stays visible to the caller
                let l = z.as_f64().ln() - (px[label] - m).as_f64();
                row_loss += if l < 0.0 { 0.0 } else { l };
                let inv_z = E::one() / z;
                for g in gpx.iter_mut() {
                    *g = *g * inv_z * inv_n;
                }
                gpx[label] = gpx[label] - inv_n;
            }
            row_loss
        })
        .collect();

    let loss = row_losses.iter().sum::<f64>() / npix as f64;
    Ok((loss, grad))
}

/// Softmax over the channel axis only (no loss); used by the network forward
/// pass to produce per-pixel class probabilities.
///
/// The partition sum accumulates in f64 regardless of the element type so
/// 32-bit probabilities still sum to 1 well within the expectation decoder's
/// tolerance.
pub fn pixel_softmax<E: Element>(logits: &Tensor<E>) -> Result<Tensor<E>> {
    let (h, w, k) = logits.dims3()?;
    if h == 0 || w == 0 || k == 0 {
        return Err(Error::shape("logit extents must be positive".to_string()));
    }
    let mut out = Tensor::zeros(&[h, w, k]);
    let data = logits.data();
    out.data_mut()
        .par_chunks_mut(w * k)
        .enumerate()
        .for_each(|(r, orow)| {
            for c in 0..w {
                let px = &data[(r * w + c) * k..(r * w + c) * k + k];
                let opx = &mut orow[c * k..(c + 1) * k];
                let mut m = px[0];
                for &v in &px[1..] {
                    if v > m {
                        m = v;
                    }
                }
                let mut z = 0.0f64;
                for (o, &v) in opx.iter_mut().zip(px.iter()) {
                    let e = (v - m).exp();
                    *o = e;
                    z += e.as_f64();
                }
                let inv_z = E::from_f64(1.0 / z);
                for o in opx.iter_mut() {
                    *o = *o * inv_z;
                }
            }
        });
    Ok(out)
}
