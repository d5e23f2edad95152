//! Mini-batch SGD with momentum and weight decay, epoch scheduling,
//! misclassification validation and best-checkpoint retention.

use crate::datapipe::SceneSample;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::labels::LabelField;
use crate::netgraph::{backward, forward, init_params, NetParams, NetworkSpec, ParamSet};
use crate::tensor::{Element, Tensor};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::time::Instant;

/// Training hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Fraction of the dataset held out for per-epoch validation.
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.02,
            momentum: 0.9,
            weight_decay: 5e-5,
            batch_size: 5,
            epochs: 100,
            seed: 0,
            validation_fraction: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::invalid("learning rate must be finite and >= 0"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid("momentum must be in [0, 1)"));
        }
        if self.weight_decay < 0.0 {
            return Err(Error::invalid("weight decay must be >= 0"));
        }
        if self.batch_size < 1 {
            return Err(Error::invalid("batch size must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::invalid("validation fraction must be in [0, 1)"));
        }
        Ok(())
    }
}

/// One momentum step. For every weight tensor `w` with buffer `v` and
/// gradient `g`:
///
/// ```text
/// v <- momentum * v - weight_decay * lr * w - lr * g
/// w <- w + v
/// ```
///
/// Biases follow the same rule with the weight decay term dropped.
pub fn sgd_update<E: Element>(
    params: &mut ParamSet<E>,
    grads: &NetParams<E>,
    config: &TrainConfig,
) -> Result<()> {
    let lr = E::from_f64(config.learning_rate);
    let momentum = E::from_f64(config.momentum);
    let wd_lr = E::from_f64(config.weight_decay * config.learning_rate);
    let ParamSet { weights, velocity } = params;
    for (((w, is_weight), (v, _)), (g, _)) in weights
        .tensors_mut()
        .into_iter()
        .zip(velocity.tensors_mut())
        .zip(grads.tensors())
    {
        if w.shape() != g.shape() {
            return Err(Error::shape(format!(
                "gradient shape {:?} does not match parameter shape {:?}",
                g.shape(),
                w.shape()
            )));
        }
        let decay = if is_weight { wd_lr } else { E::zero() };
        for ((wv, vv), gv) in w
            .data_mut()
            .iter_mut()
            .zip(v.data_mut().iter_mut())
            .zip(g.data().iter())
        {
            *vv = momentum * *vv - decay * *wv - lr * *gv;
            *wv = *wv + *vv;
        }
    }
    Ok(())
}

fn wrong_pixel_count<E: Element>(probs: &Tensor<E>, labels: &Grid<u8>) -> Result<usize> {
    let (h, w, k) = probs.dims3()?;
    if labels.height() != h || labels.width() != w {
        return Err(Error::shape(format!(
            "labels {}x{} do not match predictions {}x{}",
            labels.height(),
            labels.width(),
            h,
            w
        )));
    }
    let mut wrong = 0usize;
    for (r, c, label) in labels.iter() {
        let px = &probs.data()[(r * w + c) * k..(r * w + c) * k + k];
        let mut best = 0usize;
        for (i, &v) in px.iter().enumerate() {
            if v > px[best] {
                best = i;
            }
        }
        if best != label as usize {
            wrong += 1;
        }
    }
    Ok(wrong)
}

/// Fraction of pixels whose argmax class differs from the label.
pub fn misclassification<E: Element>(probs: &Tensor<E>, labels: &Grid<u8>) -> Result<f64> {
    Ok(wrong_pixel_count(probs, labels)? as f64 / labels.len() as f64)
}

/// An image converted to the training element type plus its label classes.
pub struct TrainSample<E: Element = f64> {
    pub image: Tensor<E>,
    pub labels: Grid<u8>,
}

impl<E: Element> TrainSample<E> {
    pub fn from_scene(sample: &SceneSample) -> TrainSample<E> {
        TrainSample {
            image: sample.image.cast(),
            labels: LabelField::from_mask(&sample.mask).class_indices(),
        }
    }
}

/// Per-epoch log entry. `val_misclassification` is NaN when no validation
/// split exists.
#[derive(Clone, Debug)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_misclassification: f64,
    pub wall_secs: f64,
}

impl EpochRecord {
    /// Tab-separated log line: epoch, mean train loss, validation
    /// misclassification, wall seconds.
    pub fn to_log_line(&self) -> String {
        format!(
            "{}\t{:.17e}\t{:.17e}\t{:.3}",
            self.epoch, self.train_loss, self.val_misclassification, self.wall_secs
        )
    }
}

/// Output of [`train`]: final parameters, the best-validation snapshot and
/// the epoch log.
#[derive(Debug)]
pub struct TrainResult<E: Element = f64> {
    pub params: ParamSet<E>,
    /// Weights of the epoch with the lowest validation misclassification
    /// (the final weights when no validation split exists).
    pub best_weights: NetParams<E>,
    pub best_epoch: Option<usize>,
    pub log: Vec<EpochRecord>,
}

/// The deterministic validation/training index split used by [`train`]:
/// sample indices are shuffled by the seeded generator and the first
/// `round(fraction * n)` become the validation set.
pub fn validation_split(seed: u64, n: usize, fraction: f64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(&mut rng);
    let n_val = (fraction * n as f64).round() as usize;
    let train = indices.split_off(n_val);
    (indices, train)
}

/// Pooled misclassification of the current weights over a sample set.
pub fn validate<E: Element>(
    spec: &NetworkSpec,
    weights: &NetParams<E>,
    samples: &[TrainSample<E>],
) -> Result<f64> {
    if samples.is_empty() {
        return Ok(f64::NAN);
    }
    let per_sample: Vec<Result<(usize, usize)>> = samples
        .par_iter()
        .map(|s| {
            let (probs, _) = forward(spec, weights, &s.image, false)?;
            Ok((wrong_pixel_count(&probs, &s.labels)?, s.labels.len()))
        })
        .collect();
    let mut wrong = 0usize;
    let mut total = 0usize;
    for r in per_sample {
        let (w, t) = r?;
        wrong += w;
        total += t;
    }
    Ok(wrong as f64 / total as f64)
}

/// Trains from a fresh seeded initialization on rendered scenes.
///
/// Shuffles per epoch with the seeded generator, averages gradients over
/// each mini-batch, applies [`sgd_update`], validates by misclassification
/// and retains the best-validation weights. Aborts with a diagnostic naming
/// the epoch and batch if the loss turns non-finite.
pub fn train<E: Element>(
    spec: &NetworkSpec,
    dataset: &[SceneSample],
    config: &TrainConfig,
) -> Result<TrainResult<E>> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::invalid("dataset is empty"));
    }
    let samples: Vec<TrainSample<E>> = dataset.par_iter().map(TrainSample::from_scene).collect();

    let (val_idx, train_idx) =
        validation_split(config.seed, samples.len(), config.validation_fraction);
    if train_idx.is_empty() {
        return Err(Error::invalid(
            "validation split leaves no training samples",
        ));
    }
    let val_samples: Vec<TrainSample<E>> = val_idx
        .iter()
        .map(|&i| TrainSample {
            image: samples[i].image.clone(),
            labels: samples[i].labels.clone(),
        })
        .collect();
    let mut train_order: Vec<usize> = train_idx;

    // epoch shuffles draw from their own stream so the split above stays a
    // standalone contract
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x9E3779B9));

    let mut params = init_params::<E>(spec, config.seed);
    let mut best_weights = params.weights.clone();
    let mut best_epoch = None;
    let mut best_val = f64::INFINITY;
    let mut log = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let started = Instant::now();
        train_order.shuffle(&mut rng);
        let mut loss_sum = 0.0f64;
        let mut loss_count = 0usize;

        for (batch_no, batch) in train_order.chunks(config.batch_size).enumerate() {
            let results: Vec<Result<(f64, NetParams<E>)>> = batch
                .par_iter()
                .map(|&i| {
                    let s = &samples[i];
                    let (_, cache) = forward(spec, &params.weights, &s.image, true)?;
                    backward(spec, &params.weights, &cache.unwrap(), &s.labels)
                })
                .collect();

            let mut batch_grads = params.weights.zeros_like();
            let scale = E::from_f64(1.0 / batch.len() as f64);
            let mut batch_loss = 0.0f64;
            for r in results {
                let (loss, grads) = r?;
                batch_loss += loss;
                for ((acc, _), (g, _)) in
                    batch_grads.tensors_mut().into_iter().zip(grads.tensors())
                {
                    acc.axpy(scale, g)?;
                }
            }
            batch_loss /= batch.len() as f64;
            if !batch_loss.is_finite() {
                return Err(Error::Training(format!(
                    "non-finite loss {} at epoch {}, batch {}",
                    batch_loss, epoch, batch_no
                )));
            }
            loss_sum += batch_loss * batch.len() as f64;
            loss_count += batch.len();
            sgd_update(&mut params, &batch_grads, config)?;
        }

        let val = validate(spec, &params.weights, &val_samples)?;
        if val.is_finite() && val < best_val {
            best_val = val;
            best_weights = params.weights.clone();
            best_epoch = Some(epoch);
        }
        log.push(EpochRecord {
            epoch,
            train_loss: loss_sum / loss_count.max(1) as f64,
            val_misclassification: val,
            wall_secs: started.elapsed().as_secs_f64(),
        });
    }

    if best_epoch.is_none() {
        best_weights = params.weights.clone();
    }
    Ok(TrainResult {
        params,
        best_weights,
        best_epoch,
        log,
    })
}
