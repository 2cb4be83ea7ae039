//! Labelled image datasets: MNIST IDX ingestion, the synthetic
//! size/brightness squares, deterministic batching and stratified splits.

mod batching;
mod container;
mod mnist;
mod synthetic;

pub use batching::{batch_indices, batches, draw_indices};
pub use container::{read_container, write_container, CONTAINER_MAGIC, CONTAINER_VERSION};
pub use mnist::{load_mnist_idx, IMAGE_MAGIC, LABEL_MAGIC};
pub use synthetic::{label_for, render_square, synthetic_shapes, SyntheticConfig};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::Tensor;
use crate::rng;
use crate::scalar::Scalar;

/// Names of the properties and, when the properties are compositions of
/// binary attributes, each property's attribute bits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertyTable {
    pub names: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attributes: Option<Vec<Vec<bool>>>,
}

impl PropertyTable {
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Full,
    Train,
    Test,
}

/// Generating qualities of a synthetic sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatentQualities {
    pub size: f64,
    pub brightness: f64,
}

/// Immutable set of samples (values in [0, 1]) with one property index each.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    sample_shape: Vec<usize>,
    samples: Vec<T>,
    labels: Vec<usize>,
    properties: PropertyTable,
    split: Split,
    latents: Option<Vec<LatentQualities>>,
    seed: Option<u64>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(
        sample_shape: Vec<usize>,
        samples: Vec<T>,
        labels: Vec<usize>,
        properties: PropertyTable,
    ) -> Result<Self> {
        if sample_shape.is_empty() || sample_shape.contains(&0) {
            return Err(Error::invalid(format!("invalid sample shape {sample_shape:?}")));
        }
        let per: usize = sample_shape.iter().product();
        if samples.len() != per * labels.len() {
            return Err(Error::shape(format!(
                "{} values for {} samples of shape {sample_shape:?}",
                samples.len(),
                labels.len()
            )));
        }
        if properties.names.is_empty() {
            return Err(Error::invalid("empty property table"));
        }
        if let Some(attrs) = &properties.attributes {
            if attrs.len() != properties.names.len() {
                return Err(Error::invalid("attribute table length differs from property count"));
            }
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= properties.names.len()) {
            return Err(Error::invalid(format!("label {bad} out of range for {} properties", properties.names.len())));
        }
        if samples.iter().any(|&v| !(v >= T::zero() && v <= T::one())) {
            return Err(Error::invalid("sample values must lie in [0, 1]"));
        }
        Ok(Dataset { sample_shape, samples, labels, properties, split: Split::Full, latents: None, seed: None })
    }

    pub fn with_latents(mut self, latents: Vec<LatentQualities>) -> Result<Self> {
        if latents.len() != self.labels.len() {
            return Err(Error::invalid("one latent record per sample is required"));
        }
        self.latents = Some(latents);
        Ok(self)
    }

    pub fn with_split(mut self, split: Split) -> Self {
        self.split = split;
        self
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        self.seed = seed;
        self
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sample_shape(&self) -> &[usize] {
        &self.sample_shape
    }

    pub fn sample_len(&self) -> usize {
        self.sample_shape.iter().product()
    }

    pub fn sample(&self, i: usize) -> &[T] {
        let n = self.sample_len();
        &self.samples[i * n..(i + 1) * n]
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn properties(&self) -> &PropertyTable {
        &self.properties
    }

    pub fn num_properties(&self) -> usize {
        self.properties.len()
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn latents(&self) -> Option<&[LatentQualities]> {
        self.latents.as_deref()
    }

    /// Samples per property.
    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_properties()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Stacks the selected samples into a `[k, sample_shape..]` tensor.
    pub fn gather(&self, indices: &[usize]) -> Result<Tensor<T>> {
        let mut data = Vec::with_capacity(indices.len() * self.sample_len());
        for &i in indices {
            if i >= self.len() {
                return Err(Error::invalid(format!("sample index {i} out of range")));
            }
            data.extend_from_slice(self.sample(i));
        }
        let mut shape = vec![indices.len()];
        shape.extend(&self.sample_shape);
        Tensor::new(shape, data)
    }

    pub fn subset(&self, indices: &[usize], split: Split) -> Result<Self> {
        let samples = self.gather(indices)?.into_data();
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        let latents = self.latents.as_ref().map(|l| indices.iter().map(|&i| l[i]).collect());
        Ok(Dataset {
            sample_shape: self.sample_shape.clone(),
            samples,
            labels,
            properties: self.properties.clone(),
            split,
            latents,
            seed: self.seed,
        })
    }

    pub fn cast<U: Scalar>(&self) -> Dataset<U> {
        Dataset {
            sample_shape: self.sample_shape.clone(),
            samples: self.samples.iter().map(|v| U::lit(v.as_f64())).collect(),
            labels: self.labels.clone(),
            properties: self.properties.clone(),
            split: self.split,
            latents: self.latents.clone(),
            seed: self.seed,
        }
    }
}

/// Stratified, deterministic split into (train, test).
///
/// The train side gets `round(fraction * len)` samples in total, allocated
/// across properties by largest remainder so each property keeps its share
/// to within one sample. Both sides keep the original sample order.
pub fn split<T: Scalar>(dataset: &Dataset<T>, fraction: f64, seed: u64) -> Result<(Dataset<T>, Dataset<T>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid(format!("split fraction must lie in (0, 1), got {fraction}")));
    }
    let n = dataset.len();
    let target = (fraction * n as f64).round() as usize;
    let counts = dataset.counts();
    let exact: Vec<f64> = counts.iter().map(|&c| c as f64 * fraction).collect();
    let mut take: Vec<usize> = exact.iter().map(|v| v.floor() as usize).collect();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    let mut assigned: usize = take.iter().sum();
    for &j in order.iter().cycle().take(counts.len() * 2) {
        if assigned >= target {
            break;
        }
        if take[j] < counts[j] {
            take[j] += 1;
            assigned += 1;
        }
    }

    let mut rng = rng::seeded(seed);
    let mut in_train = vec![false; n];
    for (j, &k) in take.iter().enumerate() {
        let mut members: Vec<usize> = (0..n).filter(|&i| dataset.labels[i] == j).collect();
        members.shuffle(&mut rng);
        for &i in &members[..k] {
            in_train[i] = true;
        }
    }
    let train: Vec<usize> = (0..n).filter(|&i| in_train[i]).collect();
    let test: Vec<usize> = (0..n).filter(|&i| !in_train[i]).collect();
    if train.is_empty() || test.is_empty() {
        return Err(Error::invalid("split leaves one side empty"));
    }
    Ok((dataset.subset(&train, Split::Train)?, dataset.subset(&test, Split::Test)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn toy(n: usize, classes: usize) -> Dataset<f64> {
        let samples = (0..n * 2).map(|i| (i % 7) as f64 / 7.0).collect();
        let labels = (0..n).map(|i| (i * 7 + i / 3) % classes).collect();
        let props = PropertyTable { names: (0..classes).map(|j| j.to_string()).collect(), attributes: None };
        Dataset::new(vec![2], samples, labels, props).unwrap()
    }

    #[test]
    fn dataset_validation() {
        let props = PropertyTable { names: vec!["a".into(), "b".into()], attributes: None };
        assert!(Dataset::new(vec![2], vec![0.0; 4], vec![0, 2], props.clone()).is_err());
        assert!(Dataset::new(vec![2], vec![0.0; 3], vec![0, 1], props.clone()).is_err());
        assert!(Dataset::new(vec![2], vec![0.0, 1.5, 0.0, 0.0], vec![0, 1], props.clone()).is_err());
        let d = Dataset::new(vec![2], vec![0.0, 1.0, 0.5, 0.25], vec![0, 1], props).unwrap();
        assert_eq!(d.gather(&[1, 0]).unwrap().data(), &[0.5, 0.25, 0.0, 1.0]);
    }

    #[test]
    fn split_sizes_and_stratification() {
        let d = toy(1000, 4);
        let (train, test) = split(&d, 0.8, 5).unwrap();
        assert_eq!((train.len(), test.len()), (800, 200));
        for (c, t) in d.counts().iter().zip(train.counts()) {
            assert!((*c as f64 * 0.8 - t as f64).abs() <= 2.0);
        }
        assert_eq!(train.split(), Split::Train);
        assert!(split(&d, 1.0, 0).is_err());
        assert!(split(&d, 0.0, 0).is_err());
    }

    proptest! {
        #[test]
        fn split_is_disjoint_and_exhaustive(n in 20usize..300, frac in 0.1f64..0.9, seed in any::<u64>()) {
            // tag each sample with a unique value so membership can be traced
            let samples: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
            let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
            let props = PropertyTable { names: vec!["a".into(), "b".into(), "c".into()], attributes: None };
            let d = Dataset::new(vec![1], samples, labels, props).unwrap();
            let (a, b) = split(&d, frac, seed).unwrap();
            let mut seen: Vec<u64> = a.samples().iter().chain(b.samples()).map(|v| (v * n as f64).round() as u64).collect();
            seen.sort();
            prop_assert_eq!(seen, (0..n as u64).collect::<Vec<_>>());
            let again = split(&d, frac, seed).unwrap();
            prop_assert_eq!(&again.0, &a);
        }
    }
}
