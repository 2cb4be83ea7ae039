//! Run configuration: a TOML file layered over a preset, with command-line
//! overrides applied last.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use cspace::data::{load_mnist_idx, read_container, split, synthetic_shapes, Dataset, Split, SyntheticConfig};
use cspace::learner::TrainConfig;
use cspace::net::{build_conv_decoder, build_conv_encoder, build_mlp_decoder, build_mlp_encoder, NetworkSpec};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Mnist,
    Synthetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Architecture {
    Conv,
    Mlp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Trainer {
    /// Autoencoder with the prototype classifier module.
    Domain,
    Autoencoder,
    Classifier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    /// `mnist`, `synthetic`, or the path of a dataset container.
    pub source: String,
    /// Directory holding `images-idx3-ubyte[.gz]` and `labels-idx1-ubyte[.gz]`.
    pub mnist_dir: PathBuf,
    /// Fraction of an unsplit dataset used for training; the rest is the
    /// evaluation split.
    pub train_fraction: f64,
    pub split_seed: u64,
    pub synthetic: SyntheticConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub architecture: Architecture,
    /// Hidden widths of the MLP path, input side first.
    pub hidden: Vec<usize>,
    /// Base filter count `F` of the convolutional path.
    pub filters: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub preset: Preset,
    pub trainer: Trainer,
    pub output: PathBuf,
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl RunConfig {
    pub fn preset(preset: Preset) -> Self {
        let synthetic = SyntheticConfig::default();
        match preset {
            Preset::Mnist => RunConfig {
                preset,
                trainer: Trainer::Domain,
                output: PathBuf::from("runs/mnist"),
                dataset: DatasetConfig {
                    source: "mnist".into(),
                    mnist_dir: PathBuf::from("data/mnist"),
                    train_fraction: 0.8,
                    split_seed: 0,
                    synthetic,
                },
                model: ModelConfig { architecture: Architecture::Conv, hidden: vec![256, 64], filters: 16 },
                train: TrainConfig::mnist_defaults(),
            },
            Preset::Synthetic => RunConfig {
                preset,
                trainer: Trainer::Domain,
                output: PathBuf::from("runs/synthetic"),
                dataset: DatasetConfig {
                    source: "synthetic".into(),
                    mnist_dir: PathBuf::from("data/mnist"),
                    train_fraction: 0.8,
                    split_seed: 0,
                    synthetic,
                },
                model: ModelConfig { architecture: Architecture::Mlp, hidden: vec![256, 64], filters: 16 },
                train: TrainConfig { epochs: 20, batches_per_epoch: 100, lr: 2e-3, ..TrainConfig::mnist_defaults() },
            },
        }
    }

    /// Resolves a config file over its preset. The preset comes from
    /// `preset` when given, else from the file's `preset` key, else MNIST.
    pub fn load(path: Option<&Path>, preset: Option<Preset>) -> CliResult<Self> {
        let file: toml::Table = match path {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| CliError::io(format!("reading {}", p.display()), e))?;
                text.parse().map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        let preset = match (preset, file.get("preset")) {
            (Some(p), _) => p,
            (None, Some(v)) => v.clone().try_into().map_err(|e| CliError::Config(format!("preset: {e}")))?,
            (None, None) => Preset::Mnist,
        };
        let mut base = toml::Table::try_from(RunConfig::preset(preset)).map_err(|e| CliError::Config(e.to_string()))?;
        merge(&mut base, file);
        base.insert("preset".into(), toml::Value::try_from(preset).map_err(|e| CliError::Config(e.to_string()))?);
        toml::Value::Table(base).try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Collects every problem instead of stopping at the first.
    pub fn validate(&self) -> CliResult<()> {
        let mut problems = Vec::new();
        if let Err(e) = self.train.validate() {
            problems.push(format!("train: {e}"));
        }
        let f = self.dataset.train_fraction;
        if !(f > 0.0 && f < 1.0) {
            problems.push(format!("dataset.train_fraction must lie strictly between 0 and 1, got {f}"));
        }
        if self.dataset.source == "synthetic" {
            if let Err(e) = self.dataset.synthetic.validate() {
                problems.push(format!("dataset.synthetic: {e}"));
            }
        }
        match self.model.architecture {
            Architecture::Mlp if self.model.hidden.contains(&0) => {
                problems.push("model.hidden widths must be positive".into());
            }
            Architecture::Conv if self.model.filters == 0 => {
                problems.push("model.filters must be positive".into());
            }
            _ => {}
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(CliError::Invalid(problems))
        }
    }

    /// Loads the configured dataset and returns its `(train, eval)` splits.
    /// A container already marked as a train or test split is used whole
    /// for both.
    pub fn load_dataset(&self) -> CliResult<(Dataset<f32>, Dataset<f32>)> {
        let full = match self.dataset.source.as_str() {
            "synthetic" => synthetic_shapes::<f32>(&self.dataset.synthetic)?,
            "mnist" => {
                let dir = &self.dataset.mnist_dir;
                let images = find_idx(dir, "images-idx3-ubyte")?;
                let labels = find_idx(dir, "labels-idx1-ubyte")?;
                load_mnist_idx::<f32>(images, labels)?
            }
            path => {
                let p = Path::new(path);
                if !p.exists() {
                    return Err(CliError::MissingDataset(p.to_path_buf()));
                }
                read_container::<f32>(p)?
            }
        };
        if full.split() == Split::Full {
            Ok(split(&full, self.dataset.train_fraction, self.dataset.split_seed)?)
        } else {
            Ok((full.clone(), full))
        }
    }

    pub fn networks(&self, sample_shape: &[usize]) -> CliResult<(NetworkSpec, NetworkSpec)> {
        let n = self.train.domain_dim;
        Ok(match self.model.architecture {
            Architecture::Mlp => (
                build_mlp_encoder(sample_shape, &self.model.hidden, n)?,
                build_mlp_decoder(sample_shape, &self.model.hidden, n)?,
            ),
            Architecture::Conv => {
                let [h, w, c] = sample_shape[..] else {
                    return Err(CliError::Mismatch(format!(
                        "the convolutional architecture needs image samples, got shape {sample_shape:?}"
                    )));
                };
                let f = self.model.filters;
                (build_conv_encoder(h, w, c, f, n)?, build_conv_decoder(h, w, c, f, n)?)
            }
        })
    }
}

fn find_idx(dir: &Path, stem: &str) -> CliResult<PathBuf> {
    let plain = dir.join(stem);
    let gz = dir.join(format!("{stem}.gz"));
    if gz.exists() {
        Ok(gz)
    } else if plain.exists() {
        Ok(plain)
    } else {
        Err(CliError::MissingDataset(gz))
    }
}

/// Recursive table merge; values in `over` win.
fn merge(base: &mut toml::Table, over: toml::Table) {
    for (key, value) in over {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}
