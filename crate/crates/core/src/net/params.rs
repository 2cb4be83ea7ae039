use rand_distr::{Distribution, Normal};

use super::spec::{Layer, NetworkSpec};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor<T> {
    pub name: String,
    /// Running statistics are stored alongside weights but never receive
    /// optimizer updates.
    pub trainable: bool,
    pub value: Tensor<T>,
}

/// Parameters of a network, grouped per layer. Gradients share the type.
#[derive(Debug, Clone, PartialEq)]
pub struct Params<T> {
    pub layers: Vec<Vec<NamedTensor<T>>>,
}

pub type Grads<T> = Params<T>;

impl<T: Scalar> Params<T> {
    pub fn zeros_like(other: &Params<T>) -> Self {
        Params {
            layers: other
                .layers
                .iter()
                .map(|layer| {
                    layer
                        .iter()
                        .map(|t| NamedTensor {
                            name: t.name.clone(),
                            trainable: t.trainable,
                            value: Tensor::zeros(t.value.shape().to_vec()),
                        })
                        .collect()
                })
                .collect(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &NamedTensor<T>> {
        self.layers.iter().flatten()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut NamedTensor<T>> {
        self.layers.iter_mut().flatten()
    }

    /// Total number of scalar values.
    pub fn len(&self) -> usize {
        self.iter().map(|t| t.value.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn same_layout(&self, other: &Params<T>) -> bool {
        self.layers.len() == other.layers.len()
            && self.iter().count() == other.iter().count()
            && self.iter().zip(other.iter()).all(|(a, b)| a.name == b.name && a.value.shape() == b.value.shape())
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|t| t.value.is_finite())
    }

    pub fn cast<U: Scalar>(&self) -> Params<U> {
        Params {
            layers: self
                .layers
                .iter()
                .map(|layer| {
                    layer
                        .iter()
                        .map(|t| NamedTensor { name: t.name.clone(), trainable: t.trainable, value: t.value.cast() })
                        .collect()
                })
                .collect(),
        }
    }

    pub(crate) fn tensor(&self, layer: usize, slot: usize) -> &[T] {
        self.layers[layer][slot].value.data()
    }
}

/// Tensor layout of one layer: (name, trainable, shape, fan-in for weights).
struct Slot {
    name: &'static str,
    trainable: bool,
    shape: Vec<usize>,
    init: Init,
}

enum Init {
    HeNormal(usize),
    Zeros,
    Ones,
}

fn layer_slots(layer: &Layer, input: &[usize]) -> Vec<Slot> {
    let slot = |name, trainable, shape, init| Slot { name, trainable, shape, init };
    match layer {
        Layer::Dense { units } => vec![
            slot("kernel", true, vec![input[0], *units], Init::HeNormal(input[0])),
            slot("bias", true, vec![*units], Init::Zeros),
        ],
        Layer::Conv2d { filters, kernel, .. } | Layer::Conv2dTranspose { filters, kernel, .. } => {
            let cin = input[2];
            vec![
                slot("kernel", true, vec![*kernel, *kernel, cin, *filters], Init::HeNormal(kernel * kernel * cin)),
                slot("bias", true, vec![*filters], Init::Zeros),
            ]
        }
        Layer::BatchNorm => {
            let c = *input.last().unwrap();
            vec![
                slot("gamma", true, vec![c], Init::Ones),
                slot("beta", true, vec![c], Init::Zeros),
                slot("moving_mean", false, vec![c], Init::Zeros),
                slot("moving_variance", false, vec![c], Init::Ones),
            ]
        }
        Layer::Relu | Layer::Flatten | Layer::Reshape { .. } => Vec::new(),
    }
}

/// Draws initial parameters: He-normal weights with standard deviation
/// `sqrt(2 / fan_in)`, zero biases, unit batch-norm scale, zero shift and
/// running statistics at mean 0 / variance 1.
pub fn init_params<T: Scalar>(spec: &NetworkSpec, seed: u64) -> Result<Params<T>> {
    let shapes = spec.shapes()?;
    let mut rng = rng::seeded(seed);
    let mut layers = Vec::with_capacity(spec.layers.len());
    for (idx, layer) in spec.layers.iter().enumerate() {
        let mut entry = Vec::new();
        for slot in layer_slots(layer, &shapes[idx]) {
            let n: usize = slot.shape.iter().product();
            let data = match slot.init {
                Init::HeNormal(fan_in) => {
                    let normal =
                        Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).map_err(|e| Error::invalid(e.to_string()))?;
                    (0..n).map(|_| T::lit(normal.sample(&mut rng))).collect()
                }
                Init::Zeros => vec![T::zero(); n],
                Init::Ones => vec![T::one(); n],
            };
            entry.push(NamedTensor {
                name: format!("{idx}.{}", slot.name),
                trainable: slot.trainable,
                value: Tensor::new(slot.shape, data)?,
            });
        }
        layers.push(entry);
    }
    Ok(Params { layers })
}

/// Checks that `params` has the tensors `spec` expects.
pub fn check_params<T: Scalar>(spec: &NetworkSpec, params: &Params<T>) -> Result<()> {
    let shapes = spec.shapes()?;
    let fits = params.layers.len() == spec.layers.len()
        && spec.layers.iter().enumerate().all(|(idx, layer)| {
            let slots = layer_slots(layer, &shapes[idx]);
            slots.len() == params.layers[idx].len()
                && slots.iter().zip(&params.layers[idx]).all(|(s, t)| s.shape == t.value.shape())
        });
    if fits {
        Ok(())
    } else {
        Err(Error::shape("parameters do not match the network layout"))
    }
}
