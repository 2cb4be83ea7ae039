//! The three loss terms and their gated combination.

use super::config::{LossWeights, RegParams};
use crate::error::{check_dim, Error, Result};
use crate::geometry::{similarity_vector, softmax, PrototypeSet, SimilarityParams};
use crate::scalar::Scalar;

/// Floor applied to predicted probabilities before the logarithm.
pub const PROB_FLOOR: f64 = 1e-12;

/// Mean squared error between a sample and its reconstruction.
pub fn reconstruction_loss<T: Scalar>(x: &[T], xhat: &[T]) -> Result<T> {
    check_dim(x.len(), xhat.len())?;
    if x.is_empty() {
        return Err(Error::invalid("empty sample"));
    }
    let n = T::lit(x.len() as f64);
    Ok(x.iter().zip(xhat).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>() / n)
}

/// Gradient of [`reconstruction_loss`] with respect to the reconstruction.
pub fn reconstruction_grad<T: Scalar>(x: &[T], xhat: &[T]) -> Vec<T> {
    let scale = T::lit(2.0 / x.len() as f64);
    x.iter().zip(xhat).map(|(&a, &b)| scale * (b - a)).collect()
}

/// Categorical cross-entropy `-log chat[j*]` against a one-hot target.
pub fn classification_loss<T: Scalar>(c: &[T], chat: &[T]) -> Result<T> {
    check_dim(c.len(), chat.len())?;
    let hot = one_hot_index(c).ok_or_else(|| Error::invalid("target is not one-hot"))?;
    Ok(-chat[hot].max(T::lit(PROB_FLOOR)).ln())
}

fn one_hot_index<T: Scalar>(c: &[T]) -> Option<usize> {
    let ones: Vec<usize> = (0..c.len()).filter(|&j| c[j] == T::one()).collect();
    let zeros = c.iter().filter(|&&v| v == T::zero()).count();
    (ones.len() == 1 && zeros == c.len() - 1).then(|| ones[0])
}

pub fn one_hot<T: Scalar>(index: usize, len: usize) -> Vec<T> {
    (0..len).map(|j| if j == index { T::one() } else { T::zero() }).collect()
}

/// `(d^2)^(k2/2)`, which equals `d^k2` and has a finite derivative at zero.
fn power<T: Scalar>(d: T, k2: T) -> T {
    (d * d).powf(k2 / T::lit(2.0))
}

/// Mean of `d_j^k2 / k1` over the prototypes other than the true one.
pub fn distortion_reg<T: Scalar>(d: &[T], true_idx: usize, reg: RegParams) -> Result<T> {
    if d.len() < 2 {
        return Err(Error::invalid("distortion regularization needs at least two prototypes"));
    }
    if true_idx >= d.len() {
        return Err(Error::invalid(format!("true property {true_idx} out of range")));
    }
    let k1 = T::lit(reg.k1);
    let k2 = T::lit(reg.k2);
    let sum: T = d.iter().enumerate().filter(|&(j, _)| j != true_idx).map(|(_, &dj)| power(dj, k2) / k1).sum();
    Ok(sum / T::lit((d.len() - 1) as f64))
}

/// Per-term values and the weighted total of one sample's loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown<T> {
    pub reconstruction: T,
    pub classification: T,
    pub distortion: T,
    pub total: T,
}

/// Whether the classification term participates in `epoch` (1-based): it is
/// left out of the first epoch, while the prototypes are still at the origin.
pub fn classification_active(epoch: usize) -> bool {
    epoch > 1
}

/// Weighted combination of the three terms for one sample.
///
/// `classification` in the breakdown is always the raw term value; only the
/// total is gated.
#[allow(clippy::too_many_arguments)]
pub fn total_loss<T: Scalar>(
    x: &[T],
    xhat: &[T],
    c: &[T],
    chat: &[T],
    d: &[T],
    weights: LossWeights,
    reg: RegParams,
    epoch: usize,
) -> Result<LossBreakdown<T>> {
    let reconstruction = reconstruction_loss(x, xhat)?;
    let classification = classification_loss(c, chat)?;
    let true_idx = one_hot_index(c).ok_or_else(|| Error::invalid("target is not one-hot"))?;
    let distortion = distortion_reg(d, true_idx, reg)?;
    Ok(combine(reconstruction, classification, distortion, weights, epoch))
}

pub(crate) fn combine<T: Scalar>(
    reconstruction: T,
    classification: T,
    distortion: T,
    weights: LossWeights,
    epoch: usize,
) -> LossBreakdown<T> {
    let mut total = T::lit(weights.alpha) * reconstruction;
    if classification_active(epoch) {
        total += T::lit(weights.beta) * classification;
    }
    total += T::lit(weights.lambda) * distortion;
    LossBreakdown { reconstruction, classification, distortion, total }
}

/// Classifier-module terms of one encoding and the gradient of
/// `beta * l_c + lambda * l_d` (gated) with respect to the encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierTerms<T> {
    pub classification: T,
    pub distortion: T,
    pub grad_q: Vec<T>,
    pub predicted: usize,
}

/// Evaluates the classifier module on `q`.
///
/// The cross-entropy-through-softmax gradient uses `chat - c` with respect to
/// the similarities; similarities then chain to `q` through
/// `ds_j/dq = -2 c s_j (q - p_j)`. The distortion term differentiates the
/// squared-norm form `(|q - p_j|^2)^(k2/2)`.
pub fn classifier_terms<T: Scalar>(
    q: &[T],
    label: usize,
    protos: &PrototypeSet<T>,
    sim: SimilarityParams,
    weights: LossWeights,
    reg: RegParams,
    epoch: usize,
) -> Result<ClassifierTerms<T>> {
    let j_count = protos.len();
    if label >= j_count {
        return Err(Error::invalid(format!("label {label} out of range for {j_count} prototypes")));
    }
    let scores = similarity_vector(q, protos, sim)?;
    let chat = softmax(&scores.similarities);
    let classification = -chat[label].max(T::lit(PROB_FLOOR)).ln();
    let distortion = distortion_reg(&scores.distortions, label, reg)?;
    let predicted = {
        let d = &scores.distortions;
        (0..j_count).fold(0, |best, j| if d[j] < d[best] { j } else { best })
    };

    let mut grad_q = vec![T::zero(); q.len()];
    let two = T::lit(2.0);
    if classification_active(epoch) && weights.beta != 0.0 {
        let scale = T::lit(weights.beta) * -two * T::lit(sim.c);
        for j in 0..j_count {
            let target = if j == label { T::one() } else { T::zero() };
            let coeff = scale * (chat[j] - target) * scores.similarities[j];
            for (g, (&qv, &pv)) in grad_q.iter_mut().zip(q.iter().zip(protos.get(j))) {
                *g += coeff * (qv - pv);
            }
        }
    }
    if weights.lambda != 0.0 {
        let k2 = T::lit(reg.k2);
        let scale = T::lit(weights.lambda) / (T::lit(reg.k1) * T::lit((j_count - 1) as f64));
        for j in (0..j_count).filter(|&j| j != label) {
            let sq = scores.distortions[j] * scores.distortions[j];
            // d/dq (sq)^(k2/2) = k2 (sq)^(k2/2 - 1) (q - p); zero at sq = 0
            if sq == T::zero() {
                continue;
            }
            let coeff = scale * k2 * sq.powf(k2 / two - T::one());
            for (g, (&qv, &pv)) in grad_q.iter_mut().zip(q.iter().zip(protos.get(j))) {
                *g += coeff * (qv - pv);
            }
        }
    }
    Ok(ClassifierTerms { classification, distortion, grad_q, predicted })
}
