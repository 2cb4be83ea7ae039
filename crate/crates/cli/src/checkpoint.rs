//! Checkpoints: a JSON manifest next to a raw parameter blob of
//! little-endian `f32` values concatenated in manifest order.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use cspace::data::PropertyTable;
use cspace::geometry::{DomainPoint, PrototypeSet, SimilarityParams};
use cspace::learner::{ClassifierOutcome, DomainModel};
use cspace::net::{check_params, NamedTensor, NetworkSpec, Params, Tensor};

use crate::config::{RunConfig, Trainer};
use crate::error::{CliError, CliResult};

pub const CHECKPOINT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const BLOB_FILE: &str = "params.bin";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub network: String,
    pub layer: usize,
    pub name: String,
    pub trainable: bool,
    pub shape: Vec<usize>,
    /// Offset into the blob, in values.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub trainer: Trainer,
    pub epochs: usize,
    /// `encoder` and, for the domain and autoencoder trainers, `decoder`;
    /// the classifier trainer stores its single network as `classifier`.
    pub networks: Vec<(String, NetworkSpec)>,
    pub tensors: Vec<TensorEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prototypes: Option<Vec<Vec<f64>>>,
    pub similarity: SimilarityParams,
    pub properties: PropertyTable,
    pub sample_shape: Vec<usize>,
    pub config: RunConfig,
}

/// A trained model of any trainer kind.
#[derive(Debug, Clone)]
pub enum Trained {
    Domain(DomainModel<f32>),
    Classifier(ClassifierOutcome<f32>),
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub manifest: Manifest,
    pub model: Trained,
}

impl Checkpoint {
    pub fn new(model: Trained, config: &RunConfig, properties: PropertyTable, sample_shape: Vec<usize>) -> Self {
        let (networks, prototypes, similarity): (Vec<(String, NetworkSpec)>, _, _) = match &model {
            Trained::Domain(m) => (
                vec![("encoder".into(), m.encoder_spec.clone()), ("decoder".into(), m.decoder_spec.clone())],
                Some(m.prototypes.coords().iter().map(|p| p.iter().map(|&v| f64::from(v)).collect()).collect()),
                m.sim,
            ),
            Trained::Classifier(c) => (vec![("classifier".into(), c.spec.clone())], None, config.train.sim),
        };
        let mut tensors = Vec::new();
        let mut offset = 0;
        for ((network, _), params) in networks.iter().zip(params_of(&model)) {
            for (layer, slots) in params.layers.iter().enumerate() {
                for t in slots {
                    tensors.push(TensorEntry {
                        network: network.clone(),
                        layer,
                        name: t.name.clone(),
                        trainable: t.trainable,
                        shape: t.value.shape().to_vec(),
                        offset,
                    });
                    offset += t.value.len();
                }
            }
        }
        let manifest = Manifest {
            format_version: CHECKPOINT_VERSION,
            trainer: config.trainer,
            epochs: config.train.epochs,
            networks,
            tensors,
            prototypes,
            similarity,
            properties,
            sample_shape,
            config: config.clone(),
        };
        Checkpoint { manifest, model }
    }

    pub fn save(&self, dir: &Path) -> CliResult<()> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
        let json = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        let mut blob = Vec::new();
        for params in params_of(&self.model) {
            for t in params.iter() {
                for v in t.value.data() {
                    blob.extend(v.to_le_bytes());
                }
            }
        }
        let write = |name: &str, bytes: &[u8]| {
            let p = dir.join(name);
            fs::write(&p, bytes).map_err(|e| CliError::io(format!("writing {}", p.display()), e))
        };
        write(MANIFEST_FILE, json.as_bytes())?;
        write(BLOB_FILE, &blob)
    }

    pub fn load(dir: &Path) -> CliResult<Self> {
        let manifest_path = dir.join(MANIFEST_FILE);
        let corrupt = |reason: String| CliError::CheckpointManifest { path: manifest_path.clone(), reason };
        let text = fs::read_to_string(&manifest_path)
            .map_err(|e| CliError::io(format!("reading {}", manifest_path.display()), e))?;
        let raw: serde_json::Value = serde_json::from_str(&text).map_err(|e| corrupt(e.to_string()))?;
        let version = raw
            .get("format_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| corrupt("missing format_version".into()))?;
        if version != u64::from(CHECKPOINT_VERSION) {
            return Err(CliError::CheckpointVersion {
                path: manifest_path,
                found: u32::try_from(version).unwrap_or(u32::MAX),
                expected: CHECKPOINT_VERSION,
            });
        }
        let manifest: Manifest = serde_json::from_value(raw).map_err(|e| corrupt(e.to_string()))?;

        let blob_path = dir.join(BLOB_FILE);
        let blob = fs::read(&blob_path).map_err(|e| CliError::io(format!("reading {}", blob_path.display()), e))?;
        let mut expected = 0;
        for t in &manifest.tensors {
            if t.offset != expected {
                return Err(corrupt(format!(
                    "tensor {}/{} starts at {}, expected {expected}",
                    t.network, t.name, t.offset
                )));
            }
            expected += t.shape.iter().product::<usize>();
        }
        if blob.len() != expected * 4 {
            return Err(CliError::CheckpointLength { path: blob_path, expected: expected * 4, found: blob.len() });
        }
        let values: Vec<f32> = blob.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect();

        let mut networks = Vec::new();
        for (name, spec) in &manifest.networks {
            let mut layers: Vec<Vec<NamedTensor<f32>>> = vec![Vec::new(); spec.layers.len()];
            for t in manifest.tensors.iter().filter(|t| &t.network == name) {
                let slot = layers
                    .get_mut(t.layer)
                    .ok_or_else(|| corrupt(format!("tensor {name}/{} names layer {}", t.name, t.layer)))?;
                let len: usize = t.shape.iter().product();
                let value = Tensor::new(t.shape.clone(), values[t.offset..t.offset + len].to_vec())
                    .map_err(|e| corrupt(e.to_string()))?;
                slot.push(NamedTensor { name: t.name.clone(), trainable: t.trainable, value });
            }
            let params = Params { layers };
            check_params(spec, &params).map_err(|e| corrupt(format!("{name}: {e}")))?;
            networks.push((name.as_str(), spec.clone(), params));
        }
        let mut take = |want: &str| {
            networks
                .iter()
                .position(|(n, _, _)| *n == want)
                .map(|i| networks.remove(i))
                .map(|(_, s, p)| (s, p))
                .ok_or_else(|| corrupt(format!("missing {want} network")))
        };
        let model = match manifest.trainer {
            Trainer::Domain | Trainer::Autoencoder => {
                let (encoder_spec, encoder) = take("encoder")?;
                let (decoder_spec, decoder) = take("decoder")?;
                let coords = manifest.prototypes.as_ref().ok_or_else(|| corrupt("missing prototypes".into()))?;
                let points = coords
                    .iter()
                    .map(|p| DomainPoint::new(p.iter().map(|&v| v as f32).collect()))
                    .collect::<cspace::Result<Vec<_>>>()
                    .map_err(|e| corrupt(e.to_string()))?;
                let props = &manifest.properties;
                let prototypes = PrototypeSet::new(points, props.names.clone(), props.attributes.clone())
                    .map_err(|e| corrupt(e.to_string()))?;
                Trained::Domain(DomainModel {
                    encoder_spec,
                    decoder_spec,
                    encoder,
                    decoder,
                    prototypes,
                    sim: manifest.similarity,
                })
            }
            Trainer::Classifier => {
                let (spec, params) = take("classifier")?;
                Trained::Classifier(ClassifierOutcome { spec, params, reports: Vec::new() })
            }
        };
        Ok(Checkpoint { manifest, model })
    }

    pub fn domain_model(&self) -> CliResult<&DomainModel<f32>> {
        match &self.model {
            Trained::Domain(m) => Ok(m),
            Trained::Classifier(_) => {
                Err(CliError::Mismatch("a classifier checkpoint has no domain, prototypes or decoder".into()))
            }
        }
    }
}

fn params_of(model: &Trained) -> Vec<&Params<f32>> {
    match model {
        Trained::Domain(m) => vec![&m.encoder, &m.decoder],
        Trained::Classifier(c) => vec![&c.params],
    }
}

pub fn checkpoint_dir(output: &Path) -> PathBuf {
    output.join("checkpoint")
}
