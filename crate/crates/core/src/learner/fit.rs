use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::loss::{classifier_terms, combine, reconstruction_grad, reconstruction_loss};
use super::prototypes::update_prototypes;
use crate::data::{batch_indices, draw_indices, Dataset};
use crate::error::{Error, Result};
use crate::geometry::{classify, PrototypeSet, SimilarityParams};
use crate::net::{
    adam_step, backward, commit_batch_stats, forward, init_params, Activations, AdamConfig, AdamState, Grads, Mode,
    NetworkSpec, Params, Tensor,
};
use crate::rng::{self, Stream};
use crate::scalar::Scalar;

/// Rows per forward pass when encoding or decoding outside training.
const CHUNK: usize = 512;

/// Encoder, decoder and prototypes of one learned domain.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainModel<T> {
    pub encoder_spec: NetworkSpec,
    pub decoder_spec: NetworkSpec,
    pub encoder: Params<T>,
    pub decoder: Params<T>,
    pub prototypes: PrototypeSet<T>,
    pub sim: SimilarityParams,
}

impl<T: Scalar> DomainModel<T> {
    pub fn domain_dim(&self) -> usize {
        self.prototypes.dim()
    }

    /// Infer-mode encodings of the selected samples, one row per sample.
    pub fn encode_indices(&self, dataset: &Dataset<T>, indices: &[usize]) -> Result<Vec<Vec<T>>> {
        encode_indices(&self.encoder_spec, &self.encoder, dataset, indices)
    }

    pub fn encode_dataset(&self, dataset: &Dataset<T>) -> Result<Vec<Vec<T>>> {
        let all: Vec<usize> = (0..dataset.len()).collect();
        self.encode_indices(dataset, &all)
    }

    /// Infer-mode reconstructions of domain points, `[k, sample_shape..]`.
    pub fn decode(&self, points: &[Vec<T>]) -> Result<Tensor<T>> {
        let n = self.decoder_spec.input_len();
        let mut out = Vec::new();
        for chunk in points.chunks(CHUNK) {
            let data: Vec<T> = chunk.iter().flatten().copied().collect();
            if data.len() != chunk.len() * n {
                return Err(Error::DimensionMismatch { expected: n, actual: chunk[0].len() });
            }
            let x = Tensor::new(vec![chunk.len(), n], data)?;
            out.extend_from_slice(forward(&self.decoder_spec, &self.decoder, &x, Mode::Infer)?.output().data());
        }
        let mut shape = vec![points.len()];
        shape.extend(self.decoder_spec.output_shape()?);
        Tensor::new(shape, out)
    }

    /// Maximum-similarity property index of each encoding.
    pub fn classify_points(&self, points: &[Vec<T>]) -> Result<Vec<usize>> {
        points.iter().map(|q| Ok(classify(q, &self.prototypes, self.sim)?.0)).collect()
    }
}

pub(crate) fn encode_indices<T: Scalar>(
    spec: &NetworkSpec,
    params: &Params<T>,
    dataset: &Dataset<T>,
    indices: &[usize],
) -> Result<Vec<Vec<T>>> {
    let mut rows = Vec::with_capacity(indices.len());
    for chunk in indices.chunks(CHUNK) {
        let x = dataset.gather(chunk)?;
        let acts = forward(spec, params, &x, Mode::Infer)?;
        let out = acts.output();
        rows.extend((0..out.batch()).map(|i| out.row(i).to_vec()));
    }
    Ok(rows)
}

/// The prototype-update draw of one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrototypeDraw {
    pub indices: Vec<usize>,
    pub labels: Vec<usize>,
    pub encodings: Vec<Vec<f64>>,
}

/// One line of the training log. Losses are means over the epoch's batches
/// of the per-batch means; `prototypes` is the state after the epoch's
/// update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    pub loss_r: f64,
    pub loss_c: f64,
    pub loss_d: f64,
    pub loss: f64,
    pub accuracy: f64,
    pub prototypes: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub draw: Option<PrototypeDraw>,
}

impl EpochReport {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FitOptions {
    /// Keep each epoch's prototype draw (indices and encodings) in its report.
    pub record_draws: bool,
}

#[derive(Debug, Clone)]
pub struct FitOutcome<T> {
    pub model: DomainModel<T>,
    pub reports: Vec<EpochReport>,
}

/// Batch means of the loss terms and the gradients of the gated total.
#[derive(Debug, Clone)]
pub struct BatchOutcome<T> {
    pub loss_r: T,
    pub loss_c: T,
    pub loss_d: T,
    pub loss: T,
    pub correct: usize,
    pub encoder_grads: Grads<T>,
    pub decoder_grads: Grads<T>,
    pub encoder_acts: Activations<T>,
    pub decoder_acts: Activations<T>,
}

/// Train-mode forward and backward pass of one batch.
///
/// The reconstruction gradient reaches the encoding through the decoder and
/// is summed with the classifier-module gradient before the encoder
/// backward pass. Prototypes are constants here.
#[allow(clippy::too_many_arguments)]
pub fn batch_objective<T: Scalar>(
    encoder_spec: &NetworkSpec,
    encoder: &Params<T>,
    decoder_spec: &NetworkSpec,
    decoder: &Params<T>,
    protos: &PrototypeSet<T>,
    x: &Tensor<T>,
    labels: &[usize],
    config: &TrainConfig,
    epoch: usize,
) -> Result<BatchOutcome<T>> {
    let b = x.batch();
    if labels.len() != b || b == 0 {
        return Err(Error::invalid(format!("{} labels for a batch of {b}", labels.len())));
    }
    let encoder_acts = forward(encoder_spec, encoder, x, Mode::Train)?;
    let q = encoder_acts.output();
    let decoder_acts = forward(decoder_spec, decoder, q, Mode::Train)?;
    let xhat = decoder_acts.output();
    if xhat.shape() != x.shape() {
        return Err(Error::shape(format!("reconstruction {:?} does not match input {:?}", xhat.shape(), x.shape())));
    }

    let inv_b = T::one() / T::lit(b as f64);
    let alpha = T::lit(config.loss.alpha);
    let (mut sum_r, mut sum_c, mut sum_d) = (T::zero(), T::zero(), T::zero());
    let mut xhat_grad = Vec::with_capacity(xhat.len());
    let mut q_grad = Vec::with_capacity(q.len());
    let mut correct = 0;
    for i in 0..b {
        sum_r += reconstruction_loss(x.row(i), xhat.row(i))?;
        xhat_grad.extend(reconstruction_grad(x.row(i), xhat.row(i)).into_iter().map(|g| g * alpha * inv_b));
        let terms = classifier_terms(q.row(i), labels[i], protos, config.sim, config.loss, config.reg, epoch)?;
        sum_c += terms.classification;
        sum_d += terms.distortion;
        q_grad.extend(terms.grad_q.into_iter().map(|g| g * inv_b));
        correct += usize::from(terms.predicted == labels[i]);
    }
    let parts = combine(sum_r * inv_b, sum_c * inv_b, sum_d * inv_b, config.loss, epoch);
    if !parts.total.is_finite() {
        return Err(Error::NonFinite(format!(
            "batch loss (l_r {}, l_c {}, l_d {})",
            parts.reconstruction, parts.classification, parts.distortion
        )));
    }

    let (decoder_grads, dq) =
        backward(decoder_spec, decoder, &decoder_acts, &Tensor::new(xhat.shape().to_vec(), xhat_grad)?)?;
    let mut q_grad = Tensor::new(q.shape().to_vec(), q_grad)?;
    q_grad.add_assign(&dq)?;
    let (encoder_grads, _) = backward(encoder_spec, encoder, &encoder_acts, &q_grad)?;
    Ok(BatchOutcome {
        loss_r: parts.reconstruction,
        loss_c: parts.classification,
        loss_d: parts.distortion,
        loss: parts.total,
        correct,
        encoder_grads,
        decoder_grads,
        encoder_acts,
        decoder_acts,
    })
}

/// Checks that the networks fit the dataset and the domain dimension.
pub(crate) fn check_networks<T: Scalar>(
    dataset: &Dataset<T>,
    encoder_spec: &NetworkSpec,
    decoder_spec: Option<&NetworkSpec>,
    config: &TrainConfig,
) -> Result<()> {
    config.validate()?;
    if encoder_spec.input_shape != dataset.sample_shape() {
        return Err(Error::shape(format!(
            "encoder input {:?} does not match samples {:?}",
            encoder_spec.input_shape,
            dataset.sample_shape()
        )));
    }
    if encoder_spec.output_shape()? != [config.domain_dim] {
        return Err(Error::shape(format!(
            "encoder output {:?} is not a {}-dimensional domain point",
            encoder_spec.output_shape()?,
            config.domain_dim
        )));
    }
    if let Some(dec) = decoder_spec {
        if dec.input_shape != [config.domain_dim] || dec.output_shape()? != dataset.sample_shape() {
            return Err(Error::shape(format!(
                "decoder maps {:?} to {:?}, expected [{}] to {:?}",
                dec.input_shape,
                dec.output_shape()?,
                config.domain_dim,
                dataset.sample_shape()
            )));
        }
    }
    if config.batch_size > dataset.len() {
        return Err(Error::invalid(format!(
            "batch size {} exceeds the {} training samples",
            config.batch_size,
            dataset.len()
        )));
    }
    Ok(())
}

fn with_context<T>(r: Result<T>, epoch: usize, batch: usize) -> Result<T> {
    r.map_err(|e| match e {
        Error::NonFinite(what) => Error::NonFinite(format!("epoch {epoch}, batch {batch}: {what}")),
        other => other,
    })
}

pub fn fit<T: Scalar>(
    dataset: &Dataset<T>,
    encoder_spec: &NetworkSpec,
    decoder_spec: &NetworkSpec,
    config: &TrainConfig,
) -> Result<FitOutcome<T>> {
    fit_with(dataset, encoder_spec, decoder_spec, config, FitOptions::default(), |_| {})
}

/// Joint training of encoder, decoder and prototypes.
///
/// Each epoch runs `batches_per_epoch` Adam steps on the gated loss, then
/// encodes a fresh draw of `batches_per_epoch * batch_size` training samples
/// (capped at the dataset size) in infer mode and moves the prototypes
/// toward the per-property means. `on_epoch` sees every report as soon as it
/// is final.
pub fn fit_with<T: Scalar>(
    dataset: &Dataset<T>,
    encoder_spec: &NetworkSpec,
    decoder_spec: &NetworkSpec,
    config: &TrainConfig,
    options: FitOptions,
    mut on_epoch: impl FnMut(&EpochReport),
) -> Result<FitOutcome<T>> {
    check_networks(dataset, encoder_spec, Some(decoder_spec), config)?;
    let classes = dataset.num_properties();
    if classes < 2 {
        return Err(Error::invalid("training needs at least two properties"));
    }
    if let Some(j) = dataset.counts().iter().position(|&c| c == 0) {
        return Err(Error::invalid(format!("property {j} has no training samples")));
    }
    let draw_size = (config.batches_per_epoch * config.batch_size).min(dataset.len());
    if draw_size < classes {
        return Err(Error::invalid(format!("prototype draw of {draw_size} samples cannot cover {classes} properties")));
    }

    let mut encoder = init_params::<T>(encoder_spec, rng::derive_seed(config.seed, Stream::EncoderInit, 0))?;
    let mut decoder = init_params::<T>(decoder_spec, rng::derive_seed(config.seed, Stream::DecoderInit, 0))?;
    let props = dataset.properties();
    let mut protos = PrototypeSet::zeros(config.domain_dim, props.names.clone(), props.attributes.clone())?;
    let adam = AdamConfig::with_lr(config.lr);
    let mut enc_state = AdamState::new(&encoder);
    let mut dec_state = AdamState::new(&decoder);
    let mut reports = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        let seed = rng::derive_seed(config.seed, Stream::Batches, epoch as u64);
        let plan = batch_indices(dataset.len(), config.batches_per_epoch, config.batch_size, seed)?;
        let (mut sum_r, mut sum_c, mut sum_d, mut sum) = (0.0, 0.0, 0.0, 0.0);
        let mut correct = 0;
        for (bi, idx) in plan.iter().enumerate() {
            let x = dataset.gather(idx)?;
            let labels: Vec<usize> = idx.iter().map(|&i| dataset.labels()[i]).collect();
            let out = with_context(
                batch_objective(encoder_spec, &encoder, decoder_spec, &decoder, &protos, &x, &labels, config, epoch),
                epoch,
                bi,
            )?;
            with_context(adam_step(&mut encoder, &out.encoder_grads, &mut enc_state, &adam), epoch, bi)?;
            with_context(adam_step(&mut decoder, &out.decoder_grads, &mut dec_state, &adam), epoch, bi)?;
            commit_batch_stats(&mut encoder, &out.encoder_acts);
            commit_batch_stats(&mut decoder, &out.decoder_acts);
            sum_r += out.loss_r.as_f64();
            sum_c += out.loss_c.as_f64();
            sum_d += out.loss_d.as_f64();
            sum += out.loss.as_f64();
            correct += out.correct;
        }

        let mut draw_rng = rng::stream(config.seed, Stream::PrototypeDraw, epoch as u64);
        let mut drawn = draw_indices(dataset.len(), draw_size, &mut draw_rng);
        if epoch == 1 {
            let mut attempts = 1;
            while !covers(dataset, &drawn, classes) {
                if attempts == 10_000 {
                    return Err(Error::invalid("prototype draw never covered every property"));
                }
                drawn = draw_indices(dataset.len(), draw_size, &mut draw_rng);
                attempts += 1;
            }
        }
        let codes = with_context(encode_indices(encoder_spec, &encoder, dataset, &drawn), epoch, plan.len())?;
        let labels: Vec<usize> = drawn.iter().map(|&i| dataset.labels()[i]).collect();
        let pairs: Vec<(Vec<T>, usize)> = codes.into_iter().zip(labels.iter().copied()).collect();
        protos = update_prototypes(&pairs, &protos, config.mu, epoch)?;

        let m = plan.len() as f64;
        let report = EpochReport {
            epoch,
            loss_r: sum_r / m,
            loss_c: sum_c / m,
            loss_d: sum_d / m,
            loss: sum / m,
            accuracy: correct as f64 / (m * config.batch_size as f64),
            prototypes: to_f64(&protos.coords()),
            draw: options.record_draws.then(|| PrototypeDraw {
                indices: drawn.clone(),
                labels,
                encodings: to_f64(&pairs.iter().map(|(q, _)| q.clone()).collect::<Vec<_>>()),
            }),
        };
        on_epoch(&report);
        reports.push(report);
    }

    Ok(FitOutcome {
        model: DomainModel {
            encoder_spec: encoder_spec.clone(),
            decoder_spec: decoder_spec.clone(),
            encoder,
            decoder,
            prototypes: protos,
            sim: config.sim,
        },
        reports,
    })
}

fn covers<T: Scalar>(dataset: &Dataset<T>, drawn: &[usize], classes: usize) -> bool {
    let mut seen = vec![false; classes];
    for &i in drawn {
        seen[dataset.labels()[i]] = true;
    }
    seen.iter().all(|&s| s)
}

pub(crate) fn to_f64<T: Scalar>(rows: &[Vec<T>]) -> Vec<Vec<f64>> {
    rows.iter().map(|r| r.iter().map(|v| v.as_f64()).collect()).collect()
}
