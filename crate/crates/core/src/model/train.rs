//! Minibatch gradient descent with momentum.
//!
//! Training is deterministic given the seed: shuffling uses a dedicated
//! ChaCha stream, per-sample gradients are computed in parallel but summed
//! in sample order, and the update rule has no other randomness.

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PointCloud;

use super::{sample_loss_and_gradients, Gradients, PointClassifier};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 15, batch_size: 32, learning_rate: 0.02, momentum: 0.9, seed: 7 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs_run: usize,
    pub epoch_mean_losses: Vec<f64>,
    pub train_accuracy: f64,
}

/// Fraction of samples whose predicted class equals the label.
pub fn evaluate_accuracy(model: &PointClassifier, samples: &[(PointCloud, usize)]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidConfig("cannot evaluate accuracy on an empty set".into()));
    }
    let correct: usize = samples
        .par_iter()
        .map(|(cloud, label)| -> Result<usize> {
            Ok((model.predict(cloud)? == *label) as usize)
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(correct as f64 / samples.len() as f64)
}

/// Trains `model` on `samples`, returning the trained model and a report
/// with per-epoch mean losses and final training-set accuracy.
///
/// Zero epochs leave the parameters untouched. A NaN or infinite batch loss
/// aborts with a numeric-failure error.
pub fn train(
    mut model: PointClassifier,
    samples: &[(PointCloud, usize)],
    config: &TrainConfig,
) -> Result<(PointClassifier, TrainReport)> {
    if samples.is_empty() {
        return Err(Error::InvalidConfig("training set is empty".into()));
    }
    if config.batch_size == 0 {
        return Err(Error::InvalidConfig("batch_size must be positive".into()));
    }
    for (cloud, label) in samples {
        if *label >= model.num_classes {
            return Err(Error::InvalidLabel { label: *label, num_classes: model.num_classes });
        }
        if cloud.is_empty() {
            return Err(Error::EmptyCloud);
        }
    }

    let mut velocity = Gradients::zeros_like(&model);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut epoch_mean_losses = Vec::with_capacity(config.epochs);

    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            let results: Vec<(f64, Gradients)> = batch
                .par_iter()
                .map(|&i| sample_loss_and_gradients(&model, &samples[i].0, samples[i].1))
                .collect::<Result<Vec<_>>>()?;
            let mut batch_grads = Gradients::zeros_like(&model);
            let mut batch_loss = 0.0;
            for (loss, grads) in &results {
                batch_loss += loss;
                batch_grads.add_assign(grads);
            }
            let inv = 1.0 / batch.len() as f64;
            batch_grads.scale(inv);
            batch_loss *= inv;
            if !batch_loss.is_finite() {
                return Err(Error::NumericFailure(format!("batch loss became {batch_loss}")));
            }
            loss_sum += batch_loss * batch.len() as f64;

            apply_momentum(&mut model, &mut velocity, &batch_grads, config.learning_rate, config.momentum);
        }
        epoch_mean_losses.push(loss_sum / samples.len() as f64);
    }

    let train_accuracy = evaluate_accuracy(&model, samples)?;
    let report =
        TrainReport { epochs_run: config.epochs, epoch_mean_losses, train_accuracy };
    Ok((model, report))
}

fn apply_momentum(
    model: &mut PointClassifier,
    velocity: &mut Gradients,
    grads: &Gradients,
    lr: f64,
    mu: f64,
) {
    let update =
        |layer_w: &mut ndarray::Array2<f64>,
         layer_b: &mut ndarray::Array1<f64>,
         vel: &mut (ndarray::Array2<f64>, ndarray::Array1<f64>),
         grad: &(ndarray::Array2<f64>, ndarray::Array1<f64>)| {
            vel.0.zip_mut_with(&grad.0, |v, &g| *v = mu * *v - lr * g);
            vel.1.zip_mut_with(&grad.1, |v, &g| *v = mu * *v - lr * g);
            *layer_w += &vel.0;
            *layer_b += &vel.1;
        };
    for ((layer, vel), grad) in
        model.per_point.iter_mut().zip(velocity.per_point.iter_mut()).zip(grads.per_point.iter())
    {
        update(&mut layer.weights, &mut layer.biases, vel, grad);
    }
    for ((layer, vel), grad) in
        model.head.iter_mut().zip(velocity.head.iter_mut()).zip(grads.head.iter())
    {
        update(&mut layer.weights, &mut layer.biases, vel, grad);
    }
}
