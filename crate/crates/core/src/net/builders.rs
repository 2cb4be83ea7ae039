//! Encoder/decoder architectures.

use super::spec::{Layer, NetworkSpec};
use crate::error::{Error, Result};

/// Convolutional encoder: four conv + batch-norm + relu stages (the first and
/// third with stride 2), then flatten and a linear dense layer to `dim`.
pub fn build_conv_encoder(h: usize, w: usize, c: usize, filters: usize, dim: usize) -> Result<NetworkSpec> {
    check_image(h, w, c, filters, dim)?;
    let conv = |filters, kernel, stride| Layer::Conv2d { filters, kernel, stride };
    let layers = vec![
        conv(filters, 7, 2),
        Layer::BatchNorm,
        Layer::Relu,
        conv(filters, 5, 1),
        Layer::BatchNorm,
        Layer::Relu,
        conv(2 * filters, 3, 2),
        Layer::BatchNorm,
        Layer::Relu,
        conv(2 * filters, 3, 1),
        Layer::BatchNorm,
        Layer::Relu,
        Layer::Flatten,
        Layer::Dense { units: dim },
    ];
    NetworkSpec::new(vec![h, w, c], layers)
}

/// Mirror of [`build_conv_encoder`]: dense back to the flattened feature
/// map, then transposed convolutions undoing each stage in reverse. The last
/// layer reconstructs `h x w x c` with a linear output.
pub fn build_conv_decoder(h: usize, w: usize, c: usize, filters: usize, dim: usize) -> Result<NetworkSpec> {
    check_image(h, w, c, filters, dim)?;
    let (h2, w2) = (h / 2, w / 2);
    let (h4, w4) = (h / 4, w / 4);
    let up = |filters, kernel, stride, out: [usize; 2]| Layer::Conv2dTranspose {
        filters,
        kernel,
        stride,
        output_hw: Some(out),
    };
    let layers = vec![
        Layer::Dense { units: h4 * w4 * 2 * filters },
        Layer::Reshape { shape: vec![h4, w4, 2 * filters] },
        up(2 * filters, 3, 1, [h4, w4]),
        Layer::BatchNorm,
        Layer::Relu,
        up(filters, 3, 2, [h2, w2]),
        Layer::BatchNorm,
        Layer::Relu,
        up(filters, 5, 1, [h2, w2]),
        Layer::BatchNorm,
        Layer::Relu,
        up(c, 7, 2, [h, w]),
    ];
    NetworkSpec::new(vec![dim], layers)
}

fn check_image(h: usize, w: usize, c: usize, filters: usize, dim: usize) -> Result<()> {
    if h == 0 || w == 0 || !h.is_multiple_of(4) || !w.is_multiple_of(4) {
        return Err(Error::invalid(format!("image extent {h}x{w} must be a positive multiple of 4")));
    }
    if c == 0 || filters == 0 || dim == 0 {
        return Err(Error::invalid("channels, filters and domain dimension must be positive"));
    }
    Ok(())
}

/// Dense + relu stack over the flattened input ending in a linear `dim`-wide
/// layer. An empty `hidden` list gives a linear encoder.
pub fn build_mlp_encoder(input_shape: &[usize], hidden: &[usize], dim: usize) -> Result<NetworkSpec> {
    if dim == 0 || hidden.contains(&0) {
        return Err(Error::invalid("layer widths must be positive"));
    }
    let mut layers = Vec::new();
    if input_shape.len() != 1 {
        layers.push(Layer::Flatten);
    }
    for &units in hidden {
        layers.push(Layer::Dense { units });
        layers.push(Layer::Relu);
    }
    layers.push(Layer::Dense { units: dim });
    NetworkSpec::new(input_shape.to_vec(), layers)
}

/// Mirror of [`build_mlp_encoder`] with a linear output reshaped to
/// `output_shape`.
pub fn build_mlp_decoder(output_shape: &[usize], hidden: &[usize], dim: usize) -> Result<NetworkSpec> {
    if dim == 0 || hidden.contains(&0) || output_shape.is_empty() || output_shape.contains(&0) {
        return Err(Error::invalid("layer widths must be positive"));
    }
    let mut layers = Vec::new();
    for &units in hidden.iter().rev() {
        layers.push(Layer::Dense { units });
        layers.push(Layer::Relu);
    }
    layers.push(Layer::Dense { units: output_shape.iter().product() });
    if output_shape.len() != 1 {
        layers.push(Layer::Reshape { shape: output_shape.to_vec() });
    }
    NetworkSpec::new(vec![dim], layers)
}
