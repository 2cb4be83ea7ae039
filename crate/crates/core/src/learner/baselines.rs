//! Comparison trainers: an autoencoder without the classifier module, and an
//! encoder with a dense softmax head trained on cross-entropy alone.

use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::fit::{check_networks, encode_indices, DomainModel};
use super::loss::{reconstruction_grad, reconstruction_loss, PROB_FLOOR};
use super::prototypes::class_means;
use crate::data::{batch_indices, Dataset};
use crate::error::{Error, Result};
use crate::geometry::{softmax, DomainPoint, PrototypeSet};
use crate::net::{
    adam_step, backward, commit_batch_stats, forward, init_params, AdamConfig, AdamState, Layer, Mode, NetworkSpec,
    Params, Tensor,
};
use crate::rng::{self, Stream};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub epoch: usize,
    /// Mean over the epoch's batches of the per-batch mean loss.
    pub loss: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct AutoencoderOutcome<T> {
    /// Prototypes are the per-property means of the final training-set
    /// encodings, so region metrics can be compared with the full learner.
    pub model: DomainModel<T>,
    pub reports: Vec<BaselineReport>,
}

/// Trains encoder and decoder on `alpha * l_r` only, with the same seed
/// streams, batch order and optimizer as the full learner.
pub fn train_autoencoder_baseline<T: Scalar>(
    dataset: &Dataset<T>,
    encoder_spec: &NetworkSpec,
    decoder_spec: &NetworkSpec,
    config: &TrainConfig,
) -> Result<AutoencoderOutcome<T>> {
    check_networks(dataset, encoder_spec, Some(decoder_spec), config)?;
    let mut encoder = init_params::<T>(encoder_spec, rng::derive_seed(config.seed, Stream::EncoderInit, 0))?;
    let mut decoder = init_params::<T>(decoder_spec, rng::derive_seed(config.seed, Stream::DecoderInit, 0))?;
    let adam = AdamConfig::with_lr(config.lr);
    let mut enc_state = AdamState::new(&encoder);
    let mut dec_state = AdamState::new(&decoder);
    let alpha = T::lit(config.loss.alpha);
    let mut reports = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        let seed = rng::derive_seed(config.seed, Stream::Batches, epoch as u64);
        let plan = batch_indices(dataset.len(), config.batches_per_epoch, config.batch_size, seed)?;
        let mut total = 0.0;
        for idx in &plan {
            let x = dataset.gather(idx)?;
            let b = idx.len();
            let inv_b = T::one() / T::lit(b as f64);
            let enc_acts = forward(encoder_spec, &encoder, &x, Mode::Train)?;
            let dec_acts = forward(decoder_spec, &decoder, enc_acts.output(), Mode::Train)?;
            let xhat = dec_acts.output();
            let mut sum = T::zero();
            let mut grad = Vec::with_capacity(xhat.len());
            for i in 0..b {
                sum += reconstruction_loss(x.row(i), xhat.row(i))?;
                grad.extend(reconstruction_grad(x.row(i), xhat.row(i)).into_iter().map(|g| g * alpha * inv_b));
            }
            let loss = alpha * (sum * inv_b);
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!("autoencoder baseline loss in epoch {epoch}")));
            }
            let (dec_grads, dq) =
                backward(decoder_spec, &decoder, &dec_acts, &Tensor::new(xhat.shape().to_vec(), grad)?)?;
            let (enc_grads, _) = backward(encoder_spec, &encoder, &enc_acts, &dq)?;
            adam_step(&mut encoder, &enc_grads, &mut enc_state, &adam)?;
            adam_step(&mut decoder, &dec_grads, &mut dec_state, &adam)?;
            commit_batch_stats(&mut encoder, &enc_acts);
            commit_batch_stats(&mut decoder, &dec_acts);
            total += loss.as_f64();
        }
        reports.push(BaselineReport { epoch, loss: total / plan.len() as f64, accuracy: None });
    }

    let all: Vec<usize> = (0..dataset.len()).collect();
    let codes = encode_indices(encoder_spec, &encoder, dataset, &all)?;
    let pairs: Vec<(Vec<T>, usize)> = codes.into_iter().zip(dataset.labels().iter().copied()).collect();
    let means = class_means(&pairs, dataset.num_properties(), config.domain_dim)?;
    let points = means
        .into_iter()
        .map(|m| DomainPoint::new(m.unwrap_or_else(|| vec![T::zero(); config.domain_dim])))
        .collect::<Result<Vec<_>>>()?;
    let props = dataset.properties();
    let prototypes = PrototypeSet::new(points, props.names.clone(), props.attributes.clone())?;
    Ok(AutoencoderOutcome {
        model: DomainModel {
            encoder_spec: encoder_spec.clone(),
            decoder_spec: decoder_spec.clone(),
            encoder,
            decoder,
            prototypes,
            sim: config.sim,
        },
        reports,
    })
}

#[derive(Debug, Clone)]
pub struct ClassifierOutcome<T> {
    /// Encoder followed by a dense layer with one logit per property.
    pub spec: NetworkSpec,
    pub params: Params<T>,
    pub reports: Vec<BaselineReport>,
}

impl<T: Scalar> ClassifierOutcome<T> {
    /// Class probabilities of every sample.
    pub fn probabilities(&self, dataset: &Dataset<T>) -> Result<Vec<Vec<T>>> {
        let all: Vec<usize> = (0..dataset.len()).collect();
        Ok(encode_indices(&self.spec, &self.params, dataset, &all)?.iter().map(|z| softmax(z)).collect())
    }

    pub fn predict(&self, dataset: &Dataset<T>) -> Result<Vec<usize>> {
        Ok(self.probabilities(dataset)?.iter().map(|p| argmax(p)).collect())
    }

    pub fn accuracy(&self, dataset: &Dataset<T>) -> Result<f64> {
        let pred = self.predict(dataset)?;
        let hits = pred.iter().zip(dataset.labels()).filter(|(a, b)| a == b).count();
        Ok(hits as f64 / dataset.len().max(1) as f64)
    }
}

fn argmax<T: Scalar>(v: &[T]) -> usize {
    (0..v.len()).fold(0, |best, j| if v[j] > v[best] { j } else { best })
}

/// The encoder with a dense head of `classes` logits. The head's weights
/// come from their own seed stream so the encoder starts exactly as in the
/// full learner.
pub fn classifier_network<T: Scalar>(
    encoder_spec: &NetworkSpec,
    classes: usize,
    seed: u64,
) -> Result<(NetworkSpec, Params<T>)> {
    let spec = encoder_spec.with_layer(Layer::Dense { units: classes })?;
    let mut params = init_params::<T>(&spec, rng::derive_seed(seed, Stream::HeadInit, 0))?;
    let encoder = init_params::<T>(encoder_spec, rng::derive_seed(seed, Stream::EncoderInit, 0))?;
    for (slot, layer) in params.layers.iter_mut().zip(encoder.layers) {
        *slot = layer;
    }
    Ok((spec, params))
}

/// Trains encoder plus dense head on softmax cross-entropy only.
pub fn train_classifier_baseline<T: Scalar>(
    dataset: &Dataset<T>,
    encoder_spec: &NetworkSpec,
    config: &TrainConfig,
) -> Result<ClassifierOutcome<T>> {
    check_networks(dataset, encoder_spec, None, config)?;
    let classes = dataset.num_properties();
    let (spec, mut params) = classifier_network::<T>(encoder_spec, classes, config.seed)?;
    let adam = AdamConfig::with_lr(config.lr);
    let mut state = AdamState::new(&params);
    let floor = T::lit(PROB_FLOOR);
    let mut reports = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        let seed = rng::derive_seed(config.seed, Stream::Batches, epoch as u64);
        let plan = batch_indices(dataset.len(), config.batches_per_epoch, config.batch_size, seed)?;
        let (mut total, mut correct) = (0.0, 0usize);
        for idx in &plan {
            let x = dataset.gather(idx)?;
            let b = idx.len();
            let inv_b = T::one() / T::lit(b as f64);
            let acts = forward(&spec, &params, &x, Mode::Train)?;
            let logits = acts.output();
            let mut sum = T::zero();
            let mut grad = Vec::with_capacity(logits.len());
            for (i, &i_data) in idx.iter().enumerate() {
                let label = dataset.labels()[i_data];
                let p = softmax(logits.row(i));
                sum -= p[label].max(floor).ln();
                correct += usize::from(argmax(&p) == label);
                grad.extend(p.iter().enumerate().map(|(j, &pj)| {
                    let target = if j == label { T::one() } else { T::zero() };
                    (pj - target) * inv_b
                }));
            }
            let loss = sum * inv_b;
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!("classifier baseline loss in epoch {epoch}")));
            }
            let (grads, _) = backward(&spec, &params, &acts, &Tensor::new(logits.shape().to_vec(), grad)?)?;
            adam_step(&mut params, &grads, &mut state, &adam)?;
            commit_batch_stats(&mut params, &acts);
            total += loss.as_f64();
        }
        let seen = (plan.len() * config.batch_size) as f64;
        reports.push(BaselineReport { epoch, loss: total / plan.len() as f64, accuracy: Some(correct as f64 / seen) });
    }
    Ok(ClassifierOutcome { spec, params, reports })
}
