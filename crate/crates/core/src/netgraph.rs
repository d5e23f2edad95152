//! The staged dense-prediction network as an explicit small graph.
//!
//! Seven conv/ReLU/pool stages feed a fusion head: the outputs of the tapped
//! stages are bilinearly upsampled to the first stage's post-pool resolution,
//! stacked along channels, and pushed through a 1x1 convolution producing
//! per-pixel class logits. Backpropagation is hand-composed in reverse stage
//! order; where a stage output branches into both the next stage and the
//! fusion head, the two path gradients are summed.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::ops::{
    conv2d, conv2d_vjp, maxpool2, maxpool2_vjp, pixel_softmax, pixel_softmax_xent, relu, relu_vjp,
    PoolArgmax,
};
use crate::tensor::{ConvParams, Element, Padding, Tensor};
use crate::upsample::{upsample_bilinear, upsample_vjp};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Channels expected in input images.
pub const INPUT_CHANNELS: usize = 3;

/// One conv/ReLU/pool stage.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StageSpec {
    pub filter_count: usize,
    /// Odd spatial kernel extent.
    pub filter_size: usize,
    /// Pooling region: 1 (none) or 2.
    pub pool: usize,
    /// Whether this stage's output branches into the fusion head.
    pub tapped: bool,
}

impl StageSpec {
    pub fn new(filter_count: usize, filter_size: usize, pool: usize, tapped: bool) -> StageSpec {
        StageSpec {
            filter_count,
            filter_size,
            pool,
            tapped,
        }
    }
}

/// Declarative description of the staged architecture.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetworkSpec {
    stages: Vec<StageSpec>,
    fusion_classes: usize,
}

impl NetworkSpec {
    pub fn new(stages: Vec<StageSpec>, fusion_classes: usize) -> Result<NetworkSpec> {
        if stages.is_empty() {
            return Err(Error::invalid("network needs at least one stage"));
        }
        for (i, s) in stages.iter().enumerate() {
            if s.filter_size % 2 == 0 || s.filter_size == 0 {
                return Err(Error::invalid(format!(
                    "stage {}: filter size must be odd, got {}",
                    i, s.filter_size
                )));
            }
            if s.pool != 1 && s.pool != 2 {
                return Err(Error::invalid(format!(
                    "stage {}: pool must be 1 or 2, got {}",
                    i, s.pool
                )));
            }
            if s.filter_count == 0 {
                return Err(Error::invalid(format!("stage {}: zero filters", i)));
            }
        }
        if !stages.last().unwrap().tapped {
            return Err(Error::invalid("the last stage must be tapped"));
        }
        if fusion_classes < 2 {
            return Err(Error::invalid("fusion head needs at least 2 classes"));
        }
        Ok(NetworkSpec {
            stages,
            fusion_classes,
        })
    }

    /// The full seven-stage configuration: 50/70/100/150/100/70/70 filters,
    /// 5/5/3/3/3/3/3 kernels, pooling on the first four stages, taps on
    /// stages 1, 2, 3 and 7, and a 128-class fusion head.
    pub fn standard() -> NetworkSpec {
        NetworkSpec::new(
            vec![
                StageSpec::new(50, 5, 2, true),
                StageSpec::new(70, 5, 2, true),
                StageSpec::new(100, 3, 2, true),
                StageSpec::new(150, 3, 2, false),
                StageSpec::new(100, 3, 1, false),
                StageSpec::new(70, 3, 1, false),
                StageSpec::new(70, 3, 1, true),
            ],
            128,
        )
        .expect("standard network is valid")
    }

    /// A slimmed-down variant with the same kernel sizes, pooling and taps
    /// but 8/12/16/24/16/12/12 filters; trains in minutes on a CPU.
    pub fn reduced() -> NetworkSpec {
        NetworkSpec::new(
            vec![
                StageSpec::new(8, 5, 2, true),
                StageSpec::new(12, 5, 2, true),
                StageSpec::new(16, 3, 2, true),
                StageSpec::new(24, 3, 2, false),
                StageSpec::new(16, 3, 1, false),
                StageSpec::new(12, 3, 1, false),
                StageSpec::new(12, 3, 1, true),
            ],
            128,
        )
        .expect("reduced network is valid")
    }

    pub fn stages(&self) -> &[StageSpec] {
        &self.stages
    }

    pub fn fusion_classes(&self) -> usize {
        self.fusion_classes
    }

    /// Channel count entering the fusion head: the sum of tapped stages'
    /// filter counts.
    pub fn fusion_input_channels(&self) -> usize {
        self.stages
            .iter()
            .filter(|s| s.tapped)
            .map(|s| s.filter_count)
            .sum()
    }

    /// Input extents must be divisible by the product of all pooling
    /// regions so every pooled map and upsampling factor stays integral.
    pub fn required_divisor(&self) -> usize {
        self.stages.iter().map(|s| s.pool).product()
    }

    /// Cumulative pool product after each stage.
    fn pool_products(&self) -> Vec<usize> {
        let mut acc = 1;
        self.stages
            .iter()
            .map(|s| {
                acc *= s.pool;
                acc
            })
            .collect()
    }

    /// Upsampling factor per stage: the ratio of that stage's downsampling
    /// to the first stage's.
    fn upsample_factors(&self) -> Vec<usize> {
        let products = self.pool_products();
        let base = products[0];
        products.iter().map(|p| p / base).collect()
    }

    /// Spatial extents of the dense prediction for a given input size.
    pub fn output_extents(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        self.check_input_extents(h, w)?;
        let base = self.stages[0].pool;
        Ok((h / base, w / base))
    }

    fn check_input_extents(&self, h: usize, w: usize) -> Result<()> {
        let d = self.required_divisor();
        if h == 0 || w == 0 || !h.is_multiple_of(d) || !w.is_multiple_of(d) {
            return Err(Error::shape(format!(
                "input extents {}x{} must be positive multiples of {} \
                 (the product of all pooling regions)",
                h, w, d
            )));
        }
        Ok(())
    }

    /// Receptive field size of one output unit of the last stage, from the
    /// recurrence R(i-1) = p_i * R(i) + (s_i - 1) with R(m) = 1.
    pub fn receptive_field(&self) -> usize {
        self.stages
            .iter()
            .rev()
            .fold(1, |r, s| s.pool * r + (s.filter_size - 1))
    }

    /// Per-stage receptive fields R(m), R(m-1), ..., R(0); the last entry is
    /// the full receptive field.
    pub fn receptive_field_chain(&self) -> Vec<usize> {
        let mut chain = vec![1usize];
        for s in self.stages.iter().rev() {
            let last = *chain.last().unwrap();
            chain.push(s.pool * last + (s.filter_size - 1));
        }
        chain
    }
}

/// Weight and bias banks for every stage plus the fusion head. Also serves
/// as the container for gradients and momentum buffers, which share the
/// same shapes.
#[derive(Clone, Debug, PartialEq)]
pub struct NetParams<E: Element = f64> {
    pub stages: Vec<ConvParams<E>>,
    pub fusion: ConvParams<E>,
}

impl<E: Element> NetParams<E> {
    /// All-zero parameters shaped for `spec`.
    pub fn zeros(spec: &NetworkSpec) -> NetParams<E> {
        let mut cin = INPUT_CHANNELS;
        let mut stages = Vec::with_capacity(spec.stages().len());
        for s in spec.stages() {
            stages.push(
                ConvParams::zeros(s.filter_count, s.filter_size, s.filter_size, cin, {
                    Padding::SameZero
                })
                .expect("stage params"),
            );
            cin = s.filter_count;
        }
        let fusion = ConvParams::zeros(
            spec.fusion_classes(),
            1,
            1,
            spec.fusion_input_channels(),
            Padding::SameZero,
        )
        .expect("fusion params");
        NetParams { stages, fusion }
    }

    pub fn zeros_like(&self) -> NetParams<E> {
        NetParams {
            stages: self.stages.iter().map(|p| p.zeros_like()).collect(),
            fusion: self.fusion.zeros_like(),
        }
    }

    pub fn matches_spec(&self, spec: &NetworkSpec) -> bool {
        let reference = NetParams::<E>::zeros(spec);
        self.stages.len() == reference.stages.len()
            && self
                .stages
                .iter()
                .zip(reference.stages.iter())
                .all(|(a, b)| a.filters.shape() == b.filters.shape())
            && self.fusion.filters.shape() == reference.fusion.filters.shape()
    }

    /// Filter and bias tensors in a fixed order (stage 0 filters, stage 0
    /// bias, ..., fusion filters, fusion bias) with a weight/bias flag.
    pub fn tensors_mut(&mut self) -> Vec<(&mut Tensor<E>, bool)> {
        let mut v = Vec::new();
        for p in self.stages.iter_mut() {
            v.push((&mut p.filters, true));
            v.push((&mut p.bias, false));
        }
        v.push((&mut self.fusion.filters, true));
        v.push((&mut self.fusion.bias, false));
        v
    }

    pub fn tensors(&self) -> Vec<(&Tensor<E>, bool)> {
        let mut v = Vec::new();
        for p in self.stages.iter() {
            v.push((&p.filters, true));
            v.push((&p.bias, false));
        }
        v.push((&self.fusion.filters, true));
        v.push((&self.fusion.bias, false));
        v
    }

    pub fn is_all_finite(&self) -> bool {
        self.tensors().iter().all(|(t, _)| t.is_all_finite())
    }

    pub fn cast<F: Element>(&self) -> NetParams<F> {
        NetParams {
            stages: self.stages.iter().map(|p| p.cast()).collect(),
            fusion: self.fusion.cast(),
        }
    }
}

/// Trainable state: weights plus matching momentum buffers.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSet<E: Element = f64> {
    pub weights: NetParams<E>,
    pub velocity: NetParams<E>,
}

impl<E: Element> ParamSet<E> {
    pub fn cast<F: Element>(&self) -> ParamSet<F> {
        ParamSet {
            weights: self.weights.cast(),
            velocity: self.velocity.cast(),
        }
    }
}

/// Seeded parameter initialization: filter weights drawn uniformly from
/// `[-a, a]` with `a = sqrt(6 / (fan_in + fan_out))`, biases and momentum
/// buffers zero.
pub fn init_params<E: Element>(spec: &NetworkSpec, seed: u64) -> ParamSet<E> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = NetParams::<E>::zeros(spec);
    for p in weights
        .stages
        .iter_mut()
        .chain(std::iter::once(&mut weights.fusion))
    {
        let (count, kh, kw, cin) = p.filters.dims4().expect("filter rank");
        let fan_in = (kh * kw * cin) as f64;
        let fan_out = (kh * kw * count) as f64;
        let a = (6.0 / (fan_in + fan_out)).sqrt();
        for v in p.filters.data_mut() {
            *v = E::from_f64(rng.gen_range(-a..=a));
        }
    }
    let velocity = weights.zeros_like();
    ParamSet { weights, velocity }
}

/// Activations retained by [`forward`] for the backward pass.
#[derive(Debug)]
pub struct ForwardCache<E: Element = f64> {
    input: Tensor<E>,
    /// Pre-ReLU convolution outputs per stage.
    conv_out: Vec<Tensor<E>>,
    /// Post-pool stage outputs.
    stage_out: Vec<Tensor<E>>,
    argmax: Vec<Option<PoolArgmax>>,
    stacked: Tensor<E>,
    logits: Tensor<E>,
}

impl<E: Element> ForwardCache<E> {
    pub fn stacked(&self) -> &Tensor<E> {
        &self.stacked
    }
    pub fn logits(&self) -> &Tensor<E> {
        &self.logits
    }
    pub fn stage_out(&self, i: usize) -> &Tensor<E> {
        &self.stage_out[i]
    }
    pub fn conv_out(&self, i: usize) -> &Tensor<E> {
        &self.conv_out[i]
    }
    pub fn argmax(&self, i: usize) -> Option<&PoolArgmax> {
        self.argmax[i].as_ref()
    }
    pub fn input(&self) -> &Tensor<E> {
        &self.input
    }
}

/// Copies channels `[offset, offset + count)` of an HxWxC tensor.
pub fn slice_channels<E: Element>(t: &Tensor<E>, offset: usize, count: usize) -> Result<Tensor<E>> {
    let (h, w, c) = t.dims3()?;
    if offset + count > c {
        return Err(Error::shape(format!(
            "channel slice [{}, {}) exceeds {} channels",
            offset,
            offset + count,
            c
        )));
    }
    let mut out = Tensor::zeros(&[h, w, count]);
    let src = t.data();
    let dst = out.data_mut();
    for px in 0..h * w {
        dst[px * count..(px + 1) * count]
            .copy_from_slice(&src[px * c + offset..px * c + offset + count]);
    }
    Ok(out)
}

fn stack_channels<E: Element>(parts: &[&Tensor<E>]) -> Result<Tensor<E>> {
    let (h, w, _) = parts[0].dims3()?;
    let total: usize = parts.iter().map(|p| p.shape()[2]).sum();
    let mut out = Tensor::zeros(&[h, w, total]);
    let dst = out.data_mut();
    let mut offset = 0;
    for part in parts {
        let (ph, pw, pc) = part.dims3()?;
        if ph != h || pw != w {
            return Err(Error::shape(format!(
                "cannot stack {}x{} onto {}x{}",
                ph, pw, h, w
            )));
        }
        let src = part.data();
        for px in 0..h * w {
            dst[px * total + offset..px * total + offset + pc]
                .copy_from_slice(&src[px * pc..(px + 1) * pc]);
        }
        offset += pc;
    }
    Ok(out)
}

/// Runs the staged network on an image, producing per-pixel class
/// probabilities at the first stage's post-pool resolution.
///
/// With `keep_intermediates` the returned cache retains every activation
/// needed by [`backward`].
pub fn forward<E: Element>(
    spec: &NetworkSpec,
    params: &NetParams<E>,
    image: &Tensor<E>,
    keep_intermediates: bool,
) -> Result<(Tensor<E>, Option<ForwardCache<E>>)> {
    let (h, w, c) = image.dims3()?;
    if c != INPUT_CHANNELS {
        return Err(Error::shape(format!(
            "expected {} input channels, got {}",
            INPUT_CHANNELS, c
        )));
    }
    spec.check_input_extents(h, w)?;
    if params.stages.len() != spec.stages().len() {
        return Err(Error::shape(format!(
            "params have {} stages, spec has {}",
            params.stages.len(),
            spec.stages().len()
        )));
    }

    let factors = spec.upsample_factors();
    let mut conv_outs = Vec::new();
    let mut stage_outs: Vec<Tensor<E>> = Vec::new();
    let mut argmaxes = Vec::new();
    let mut taps: Vec<Tensor<E>> = Vec::new();

    let mut current = image.clone();
    for (i, stage) in spec.stages().iter().enumerate() {
        let conv = conv2d(&current, &params.stages[i])?;
        let activated = relu(&conv);
        let (pooled, argmax) = if stage.pool == 2 {
            let (p, a) = maxpool2(&activated)?;
            (p, Some(a))
        } else {
            (activated, None)
        };
        if stage.tapped {
            taps.push(upsample_bilinear(&pooled, factors[i])?);
        }
        if keep_intermediates {
            conv_outs.push(conv);
            argmaxes.push(argmax);
            stage_outs.push(pooled.clone());
        }
        current = pooled;
    }

    let tap_refs: Vec<&Tensor<E>> = taps.iter().collect();
    let stacked = stack_channels(&tap_refs)?;
    debug_assert_eq!(stacked.shape()[2], spec.fusion_input_channels());
    let logits = conv2d(&stacked, &params.fusion)?;
    let probs = pixel_softmax(&logits)?;

    let cache = if keep_intermediates {
        Some(ForwardCache {
            input: image.clone(),
            conv_out: conv_outs,
            stage_out: stage_outs,
            argmax: argmaxes,
            stacked,
            logits,
        })
    } else {
        None
    };
    Ok((probs, cache))
}

/// Hand-composed backward pass over the cached forward activations.
///
/// Returns the softmax cross-entropy loss and parameter gradients. At every
/// tapped stage the gradient flowing back is the sum of the path through the
/// next stage's convolution and the path through the upsampling adjoint into
/// the fusion head.
pub fn backward<E: Element>(
    spec: &NetworkSpec,
    params: &NetParams<E>,
    cache: &ForwardCache<E>,
    labels: &Grid<u8>,
) -> Result<(f64, NetParams<E>)> {
    let (loss, grad_logits) = pixel_softmax_xent(&cache.logits, labels)?;
    let (grad_stacked, grad_fusion_w, grad_fusion_b) =
        conv2d_vjp(&cache.stacked, &params.fusion, &grad_logits)?;

    // route the stacked gradient back through each tap's upsampling
    let factors = spec.upsample_factors();
    let n = spec.stages().len();
    let mut tap_grads: Vec<Option<Tensor<E>>> = vec![None; n];
    let mut offset = 0;
    for (i, stage) in spec.stages().iter().enumerate() {
        if !stage.tapped {
            continue;
        }
        let slice = slice_channels(&grad_stacked, offset, stage.filter_count)?;
        tap_grads[i] = Some(upsample_vjp(&slice, factors[i])?);
        offset += stage.filter_count;
    }

    let mut grads = NetParams {
        stages: params.stages.iter().map(|p| p.zeros_like()).collect(),
        fusion: ConvParams {
            filters: grad_fusion_w,
            bias: grad_fusion_b,
            padding: params.fusion.padding,
        },
    };

    let mut from_next: Option<Tensor<E>> = None;
    for i in (0..n).rev() {
        // branch point: sum the next-stage path and the fusion-head path
        let mut g = match (from_next.take(), tap_grads[i].take()) {
            (Some(mut a), Some(b)) => {
                a.axpy(E::one(), &b)?;
                a
            }
            (Some(a), None) => a,
            (None, Some(b)) => b,
            (None, None) => {
                return Err(Error::invalid(format!(
                    "stage {} receives no gradient; spec taps are inconsistent",
                    i
                )))
            }
        };
        if let Some(argmax) = &cache.argmax[i] {
            g = maxpool2_vjp(argmax, &g)?;
        }
        let g = relu_vjp(&cache.conv_out[i], &g)?;
        let conv_input = if i == 0 {
            &cache.input
        } else {
            &cache.stage_out[i - 1]
        };
        let (g_in, g_w, g_b) = conv2d_vjp(conv_input, &params.stages[i], &g)?;
        grads.stages[i].filters = g_w;
        grads.stages[i].bias = g_b;
        if i > 0 {
            from_next = Some(g_in);
        }
    }

    Ok((loss, grads))
}
