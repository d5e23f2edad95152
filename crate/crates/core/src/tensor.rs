//! Dense tensors and convolution parameter banks.
//!
//! A [`Tensor`] is an n-dimensional array of reals in row-major order.
//! Images and feature maps use height x width x channels; filter banks use
//! count x kh x kw x in-channels. Element precision is a type parameter:
//! `f64` for oracle-grade numerics, `f32` for the fast training path.

use crate::error::{Error, Result};
use num_traits::Float;

/// Scalar element type for tensors. Implemented for `f32` and `f64`.
///
/// The conversion methods carry distinct names (`as_f64`, not `to_f64`) so
/// they never collide with `num_traits::ToPrimitive`, which reaches scope
/// through the `Float` supertraits.
pub trait Element:
    Float + Copy + Send + Sync + std::fmt::Debug + std::fmt::Display + Default + 'static
{
    fn from_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;
    /// Round-trip through the 32-bit on-disk representation.
    fn from_f32(v: f32) -> Self;
    fn as_f32(self) -> f32;
}

impl Element for f32 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
    #[inline]
    fn from_f32(v: f32) -> Self {
        v
    }
    #[inline]
    fn as_f32(self) -> f32 {
        self
    }
}

impl Element for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
    #[inline]
    fn from_f32(v: f32) -> Self {
        v as f64
    }
    #[inline]
    fn as_f32(self) -> f32 {
        self as f32
    }
}

/// Dense n-dimensional array. The product of the shape extents always equals
/// the data length.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<E: Element = f64> {
    shape: Vec<usize>,
    data: Vec<E>,
}

impl<E: Element> Tensor<E> {
    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![E::zero(); len],
        }
    }

    pub fn filled(shape: &[usize], value: E) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; len],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<E>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::shape(format!(
                "shape {:?} implies {} elements, got {}",
                shape,
                len,
                data.len()
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[E] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [E] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<E> {
        self.data
    }

    /// Extents of a rank-3 tensor as (height, width, channels).
    pub fn dims3(&self) -> Result<(usize, usize, usize)> {
        match self.shape[..] {
            [h, w, c] => Ok((h, w, c)),
            _ => Err(Error::shape(format!(
                "expected rank-3 tensor, got shape {:?}",
                self.shape
            ))),
        }
    }

    /// Extents of a rank-4 tensor as (count, kh, kw, channels).
    pub fn dims4(&self) -> Result<(usize, usize, usize, usize)> {
        match self.shape[..] {
            [n, kh, kw, c] => Ok((n, kh, kw, c)),
            _ => Err(Error::shape(format!(
                "expected rank-4 tensor, got shape {:?}",
                self.shape
            ))),
        }
    }

    pub fn is_all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn cast<F: Element>(&self) -> Tensor<F> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| F::from_f64(v.as_f64())).collect(),
        }
    }

    /// In-place `self += scale * other`. Shapes must match.
    pub fn axpy(&mut self, scale: E, other: &Tensor<E>) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::shape(format!(
                "axpy shape mismatch: {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a = *a + scale * *b;
        }
        Ok(())
    }

    pub fn scale(&mut self, s: E) {
        for v in self.data.iter_mut() {
            *v = *v * s;
        }
    }
}

/// Zero-padding scheme for [`conv2d`](crate::ops::conv2d).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Padding {
    /// Zero-extend the input so output extents equal input extents.
    /// Requires odd kernel extents.
    SameZero,
    /// No padding; output shrinks by kernel extent minus one.
    Valid,
}

/// A bank of convolution filters plus per-filter biases.
///
/// `filters` has shape count x kh x kw x cin, `bias` has shape count.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvParams<E: Element = f64> {
    pub filters: Tensor<E>,
    pub bias: Tensor<E>,
    pub padding: Padding,
}

impl<E: Element> ConvParams<E> {
    pub fn new(filters: Tensor<E>, bias: Tensor<E>, padding: Padding) -> Result<Self> {
        let (count, kh, kw, cin) = filters.dims4()?;
        if count == 0 || kh == 0 || kw == 0 || cin == 0 {
            return Err(Error::shape(format!(
                "filter bank extents must be positive, got {:?}",
                filters.shape()
            )));
        }
        if bias.shape() != [count] {
            return Err(Error::shape(format!(
                "bias shape {:?} does not match filter count {}",
                bias.shape(),
                count
            )));
        }
        if padding == Padding::SameZero && (kh % 2 == 0 || kw % 2 == 0) {
            return Err(Error::invalid(format!(
                "same-zero padding requires odd kernel extents, got {}x{}",
                kh, kw
            )));
        }
        Ok(ConvParams {
            filters,
            bias,
            padding,
        })
    }

    pub fn zeros(count: usize, kh: usize, kw: usize, cin: usize, padding: Padding) -> Result<Self> {
        ConvParams::new(
            Tensor::zeros(&[count, kh, kw, cin]),
            Tensor::zeros(&[count]),
            padding,
        )
    }

    pub fn zeros_like(&self) -> Self {
        ConvParams {
            filters: Tensor::zeros(self.filters.shape()),
            bias: Tensor::zeros(self.bias.shape()),
            padding: self.padding,
        }
    }

    pub fn cast<F: Element>(&self) -> ConvParams<F> {
        ConvParams {
            filters: self.filters.cast(),
            bias: self.bias.cast(),
            padding: self.padding,
        }
    }
}

/// Fixed-order dot product with four accumulators. Deterministic and fast
/// enough for the scalar convolution kernels.
#[inline]
pub(crate) fn dot<E: Element>(a: &[E], b: &[E]) -> E {
    debug_assert_eq!(a.len(), b.len());
    let mut acc0 = E::zero();
    let mut acc1 = E::zero();
    let mut acc2 = E::zero();
    let mut acc3 = E::zero();
    let mut ai = a.chunks_exact(4);
    let mut bi = b.chunks_exact(4);
    for (ca, cb) in (&mut ai).zip(&mut bi) {
        acc0 = acc0 + ca[0] * cb[0];
        acc1 = acc1 + ca[1] * cb[1];
        acc2 = acc2 + ca[2] * cb[2];
        acc3 = acc3 + ca[3] * cb[3];
    }
    let mut tail = E::zero();
    for (x, y) in ai.remainder().iter().zip(bi.remainder().iter()) {
        tail = tail + *x * *y;
    }
    ((acc0 + acc1) + (acc2 + acc3)) + tail
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_rejects_length_mismatch() {
        let r = Tensor::<f64>::from_vec(&[2, 3], vec![1.0; 5]);
        assert!(matches!(r, Err(Error::Shape(_))));
    }

    #[test]
    fn shape_product_equals_data_length() {
        let t = Tensor::<f64>::zeros(&[3, 4, 5]);
        assert_eq!(t.len(), 60);
        assert_eq!(t.shape(), &[3, 4, 5]);
    }

    #[test]
    fn conv_params_reject_even_kernel_with_same_padding() {
        let r = ConvParams::<f64>::zeros(1, 2, 2, 1, Padding::SameZero);
        assert!(r.is_err());
        assert!(ConvParams::<f64>::zeros(1, 2, 2, 1, Padding::Valid).is_ok());
    }

    #[test]
    fn dot_matches_naive_sum() {
        let a: Vec<f64> = (0..13).map(|i| i as f64 * 0.5).collect();
        let b: Vec<f64> = (0..13).map(|i| (13 - i) as f64).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-12);
    }

    #[test]
    fn cast_round_trips_f32_values() {
        let t = Tensor::<f32>::from_vec(&[2], vec![1.5, -2.25]).unwrap();
        let d: Tensor<f64> = t.cast();
        let back: Tensor<f32> = d.cast();
        assert_eq!(t, back);
    }
}
