use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One layer of a feed-forward network.
///
/// Image tensors are laid out height × width × channels per sample.
/// Convolutions use "same" padding: a stride-`s` convolution maps an extent
/// `n` to `ceil(n / s)`, and a transposed convolution maps it back.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Layer {
    Dense {
        units: usize,
    },
    Relu,
    Conv2d {
        filters: usize,
        kernel: usize,
        stride: usize,
    },
    /// `output_hw` pins the spatial output size; `None` means `input * stride`.
    Conv2dTranspose {
        filters: usize,
        kernel: usize,
        stride: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        output_hw: Option<[usize; 2]>,
    },
    BatchNorm,
    Flatten,
    Reshape {
        shape: Vec<usize>,
    },
}

impl Layer {
    pub fn name(&self) -> &'static str {
        match self {
            Layer::Dense { .. } => "dense",
            Layer::Relu => "relu",
            Layer::Conv2d { .. } => "conv2d",
            Layer::Conv2dTranspose { .. } => "conv2d_transpose",
            Layer::BatchNorm => "batch_norm",
            Layer::Flatten => "flatten",
            Layer::Reshape { .. } => "reshape",
        }
    }

    /// Per-sample output shape for a per-sample input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let bad = |why: String| Err(Error::shape(format!("{} on input {input:?}: {why}", self.name())));
        match self {
            Layer::Dense { units } => {
                if input.len() != 1 {
                    return bad("dense needs a flat input".into());
                }
                if *units == 0 {
                    return bad("zero units".into());
                }
                Ok(vec![*units])
            }
            Layer::Relu | Layer::BatchNorm => Ok(input.to_vec()),
            Layer::Flatten => Ok(vec![input.iter().product()]),
            Layer::Reshape { shape } => {
                if shape.iter().product::<usize>() != input.iter().product::<usize>() || shape.contains(&0) {
                    return bad(format!("cannot reshape to {shape:?}"));
                }
                Ok(shape.clone())
            }
            Layer::Conv2d { filters, kernel, stride } => {
                let [h, w, _] = match image_dims(input) {
                    Ok(d) => d,
                    Err(e) => return bad(e),
                };
                if *filters == 0 || *kernel == 0 || *stride == 0 {
                    return bad("zero filters, kernel or stride".into());
                }
                Ok(vec![h.div_ceil(*stride), w.div_ceil(*stride), *filters])
            }
            Layer::Conv2dTranspose { filters, kernel, stride, output_hw } => {
                let [h, w, _] = match image_dims(input) {
                    Ok(d) => d,
                    Err(e) => return bad(e),
                };
                if *filters == 0 || *kernel == 0 || *stride == 0 {
                    return bad("zero filters, kernel or stride".into());
                }
                let [oh, ow] = output_hw.unwrap_or([h * stride, w * stride]);
                if oh.div_ceil(*stride) != h || ow.div_ceil(*stride) != w {
                    return bad(format!("output {oh}x{ow} is not reachable with stride {stride}"));
                }
                Ok(vec![oh, ow, *filters])
            }
        }
    }
}

fn image_dims(input: &[usize]) -> std::result::Result<[usize; 3], String> {
    match input {
        [h, w, c] => Ok([*h, *w, *c]),
        _ => Err("expected a height x width x channels input".into()),
    }
}

/// An ordered stack of layers applied to inputs of a fixed per-sample shape.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_shape: Vec<usize>,
    pub layers: Vec<Layer>,
}

impl NetworkSpec {
    pub fn new(input_shape: Vec<usize>, layers: Vec<Layer>) -> Result<Self> {
        let spec = NetworkSpec { input_shape, layers };
        spec.shapes()?;
        Ok(spec)
    }

    /// Per-sample shapes: the input followed by every layer output.
    pub fn shapes(&self) -> Result<Vec<Vec<usize>>> {
        if self.input_shape.is_empty() || self.input_shape.contains(&0) {
            return Err(Error::shape(format!("invalid input shape {:?}", self.input_shape)));
        }
        let mut shapes = vec![self.input_shape.clone()];
        for layer in &self.layers {
            let next = layer.output_shape(shapes.last().unwrap())?;
            shapes.push(next);
        }
        Ok(shapes)
    }

    pub fn output_shape(&self) -> Result<Vec<usize>> {
        Ok(self.shapes()?.pop().unwrap())
    }

    pub fn input_len(&self) -> usize {
        self.input_shape.iter().product()
    }

    pub fn output_len(&self) -> Result<usize> {
        Ok(self.output_shape()?.iter().product())
    }

    /// Width of the final dense layer when the network ends in one with no
    /// activation after it, which is what an encoder must do.
    pub fn encoder_dim(&self) -> Option<usize> {
        match self.layers.last() {
            Some(Layer::Dense { units }) => Some(*units),
            _ => None,
        }
    }

    /// Returns a copy with `layer` appended.
    pub fn with_layer(&self, layer: Layer) -> Result<Self> {
        let mut layers = self.layers.clone();
        layers.push(layer);
        Self::new(self.input_shape.clone(), layers)
    }
}
