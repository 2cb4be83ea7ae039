//! Metrics over a learned domain: accuracy, region distinctness, semantic
//! consistency of prototype distances, traversal interpretability, plus the
//! feature/image exports and the rate comparison.

mod export;
mod interpret;

pub use export::{decode_grid, export_features, grid_points, rate_report, GridSpec, RateReport};
pub use interpret::{
    axis_interpretability, best_assignment, bounding_box, decoded_brightness, decoded_size, spearman, Decoder,
    InterpretabilityReport, QualityHook, TraversalSpec,
};

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{check_dim, Error, Result};
use crate::geometry::{classify, distortion, PrototypeSet, SimilarityParams};
use crate::learner::DomainModel;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub accuracy: f64,
    /// `confusion[true][predicted]` sample counts.
    pub confusion: Vec<Vec<usize>>,
}

/// Maximum-similarity classification of precomputed encodings.
pub fn accuracy_of_points<T: Scalar>(
    points: &[Vec<T>],
    labels: &[usize],
    protos: &PrototypeSet<T>,
    sim: SimilarityParams,
) -> Result<AccuracyReport> {
    check_dim(points.len(), labels.len())?;
    let j = protos.len();
    let mut confusion = vec![vec![0usize; j]; j];
    for (q, &label) in points.iter().zip(labels) {
        if label >= j {
            return Err(Error::invalid(format!("label {label} out of range for {j} prototypes")));
        }
        confusion[label][classify(q, protos, sim)?.0] += 1;
    }
    let hits: usize = (0..j).map(|k| confusion[k][k]).sum();
    let accuracy = if points.is_empty() { 0.0 } else { hits as f64 / points.len() as f64 };
    Ok(AccuracyReport { accuracy, confusion })
}

pub fn accuracy<T: Scalar>(model: &DomainModel<T>, dataset: &Dataset<T>) -> Result<AccuracyReport> {
    let points = model.encode_dataset(dataset)?;
    accuracy_of_points(&points, dataset.labels(), &model.prototypes, model.sim)
}

/// Pairwise Euclidean distortions between prototypes.
pub fn prototype_distance_matrix<T: Scalar>(protos: &PrototypeSet<T>) -> Vec<Vec<f64>> {
    let j = protos.len();
    let mut m = vec![vec![0.0; j]; j];
    for a in 0..j {
        for b in a + 1..j {
            let d = distortion(protos.get(a), protos.get(b)).expect("prototypes share a dimension").as_f64();
            m[a][b] = d;
            m[b][a] = d;
        }
    }
    m
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub passed: bool,
    /// Smallest per-property gap between the nearest two-attribute-flip
    /// prototype and the farthest one-flip prototype.
    pub margin: f64,
    /// Per-property gap; `None` when a property lacks neighbors at either
    /// attribute distance.
    pub margins: Vec<Option<f64>>,
}

fn hamming(a: &[bool], b: &[bool]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// Requires every prototype to be strictly closer to all prototypes that
/// differ from it in one attribute than to any that differ in two.
pub fn semantic_consistency(distances: &[Vec<f64>], attributes: Option<&[Vec<bool>]>) -> Result<ConsistencyReport> {
    let attrs = attributes.ok_or_else(|| Error::invalid("semantic consistency needs attribute bit-vectors"))?;
    let j = distances.len();
    check_dim(j, attrs.len())?;
    if attrs.first().map_or(0, Vec::len) < 2 {
        return Err(Error::invalid("semantic consistency needs at least two attributes"));
    }
    let mut margins = Vec::with_capacity(j);
    for a in 0..j {
        check_dim(j, distances[a].len())?;
        let at = |h: usize| (0..j).filter(move |&b| b != a && hamming(&attrs[a], &attrs[b]) == h);
        let far_one = at(1).map(|b| distances[a][b]).fold(None, |m: Option<f64>, d| Some(m.map_or(d, |m| m.max(d))));
        let near_two = at(2).map(|b| distances[a][b]).fold(None, |m: Option<f64>, d| Some(m.map_or(d, |m| m.min(d))));
        margins.push(match (far_one, near_two) {
            (Some(h1), Some(h2)) => Some(h2 - h1),
            _ => None,
        });
    }
    let present: Vec<f64> = margins.iter().flatten().copied().collect();
    if present.is_empty() {
        return Err(Error::invalid("no property has neighbors at both attribute distances"));
    }
    let margin = present.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(ConsistencyReport { passed: margin > 0.0, margin, margins })
}

/// Silhouette-style score: the mean over samples of `(b - a) / max(a, b)`,
/// with `a` the distance to the sample's own prototype and `b` to the
/// nearest other one. A sample with `a = b = 0` contributes 0.
pub fn distinctness<T: Scalar>(points: &[Vec<T>], labels: &[usize], protos: &PrototypeSet<T>) -> Result<f64> {
    check_dim(points.len(), labels.len())?;
    if protos.len() < 2 {
        return Err(Error::invalid("distinctness needs at least two prototypes"));
    }
    if points.is_empty() {
        return Err(Error::invalid("distinctness of an empty sample set"));
    }
    let mut total = 0.0;
    for (q, &label) in points.iter().zip(labels) {
        if label >= protos.len() {
            return Err(Error::invalid(format!("label {label} out of range")));
        }
        let a = distortion(q, protos.get(label))?.as_f64();
        let mut b = f64::INFINITY;
        for j in (0..protos.len()).filter(|&j| j != label) {
            b = b.min(distortion(q, protos.get(j))?.as_f64());
        }
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / points.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainEvalReport {
    pub accuracy: f64,
    pub confusion: Vec<Vec<usize>>,
    pub distance_matrix: Vec<Vec<f64>>,
    pub distinctness: f64,
    pub consistency: Option<ConsistencyReport>,
    pub interpretability: Option<InterpretabilityReport>,
}

/// Runs every metric that applies to `dataset`. Consistency needs an
/// attribute table; interpretability needs latent-quality provenance and
/// is measured with the size and brightness hooks.
pub fn evaluate<T: Scalar>(
    model: &DomainModel<T>,
    dataset: &Dataset<T>,
    traversal: &TraversalSpec,
) -> Result<DomainEvalReport> {
    if model.prototypes.len() != dataset.num_properties() {
        return Err(Error::invalid(format!(
            "model has {} prototypes but the dataset has {} properties",
            model.prototypes.len(),
            dataset.num_properties()
        )));
    }
    if model.encoder_spec.input_shape != dataset.sample_shape() {
        return Err(Error::shape(format!(
            "model expects samples of shape {:?}, dataset has {:?}",
            model.encoder_spec.input_shape,
            dataset.sample_shape()
        )));
    }
    let points = model.encode_dataset(dataset)?;
    let acc = accuracy_of_points(&points, dataset.labels(), &model.prototypes, model.sim)?;
    let distance_matrix = prototype_distance_matrix(&model.prototypes);
    let consistency = match dataset.properties().attributes.as_deref() {
        Some(attrs) if attrs.first().map_or(0, Vec::len) >= 2 => {
            Some(semantic_consistency(&distance_matrix, Some(attrs))?)
        }
        _ => None,
    };
    let interpretability = if dataset.latents().is_some() {
        let coords: Vec<Vec<f64>> = points.iter().map(|q| q.iter().map(|v| v.as_f64()).collect()).collect();
        let bbox = bounding_box(&coords)?;
        let hooks: [(&str, QualityHook); 2] = [("size", decoded_size), ("brightness", decoded_brightness)];
        Some(axis_interpretability(model, &bbox, traversal, &hooks)?)
    } else {
        None
    };
    Ok(DomainEvalReport {
        accuracy: acc.accuracy,
        confusion: acc.confusion,
        distance_matrix,
        distinctness: distinctness(&points, dataset.labels(), &model.prototypes)?,
        consistency,
        interpretability,
    })
}
