//! Centered squares whose size and brightness are two binary attributes.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{Dataset, LatentQualities, PropertyTable};
use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub count: usize,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub size_range: [f64; 2],
    pub brightness_range: [f64; 2],
    pub size_threshold: f64,
    pub brightness_threshold: f64,
    /// No sample's quality lies within this distance of a threshold.
    pub margin: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            count: 10_000,
            height: 16,
            width: 16,
            channels: 1,
            size_range: [0.2, 0.9],
            brightness_range: [0.2, 1.0],
            size_threshold: 0.55,
            brightness_threshold: 0.6,
            margin: 0.05,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 || self.height == 0 || self.width == 0 || self.channels == 0 {
            return Err(Error::invalid("synthetic count and image extents must be positive"));
        }
        if !(self.margin >= 0.0) {
            return Err(Error::invalid("margin must be nonnegative"));
        }
        for (name, [lo, hi], t) in [
            ("size", self.size_range, self.size_threshold),
            ("brightness", self.brightness_range, self.brightness_threshold),
        ] {
            if !(lo < t - self.margin && t + self.margin < hi) {
                return Err(Error::invalid(format!(
                    "{name} range [{lo}, {hi}] leaves no band around threshold {t} with margin {}",
                    self.margin
                )));
            }
        }
        if self.size_range[0] < 0.0 || self.size_range[1] > 1.0 {
            return Err(Error::invalid("size range must lie within [0, 1]"));
        }
        if self.brightness_range[0] < 0.0 || self.brightness_range[1] > 1.0 {
            return Err(Error::invalid("brightness range must lie within [0, 1]"));
        }
        Ok(())
    }

    pub fn property_table() -> PropertyTable {
        PropertyTable {
            names: ["small-dim", "small-bright", "large-dim", "large-bright"].map(String::from).to_vec(),
            attributes: Some(vec![vec![false, false], vec![false, true], vec![true, false], vec![true, true]]),
        }
    }
}

/// Property index `2 * [size > size*] + [brightness > brightness*]`.
pub fn label_for(size: f64, brightness: f64, config: &SyntheticConfig) -> usize {
    2 * usize::from(size > config.size_threshold) + usize::from(brightness > config.brightness_threshold)
}

/// A centered filled square of side `round(size * min(h, w))` pixels and
/// intensity `brightness` on a zero background, channel-last.
pub fn render_square<T: Scalar>(size: f64, brightness: f64, h: usize, w: usize, c: usize) -> Vec<T> {
    let side = ((size * h.min(w) as f64).round() as usize).min(h.min(w));
    let top = (h - side) / 2;
    let left = (w - side) / 2;
    let mut img = vec![T::zero(); h * w * c];
    let value = T::lit(brightness);
    for r in top..top + side {
        for col in left..left + side {
            let at = (r * w + col) * c;
            img[at..at + c].iter_mut().for_each(|v| *v = value);
        }
    }
    img
}

/// Uniform draw from `[lo, t - m] ∪ [t + m, hi]`.
fn draw_quality(rng: &mut rng::Rng, [lo, hi]: [f64; 2], t: f64, m: f64) -> f64 {
    let below = (t - m) - lo;
    let above = hi - (t + m);
    let u = rng.random_range(0.0..below + above);
    if u < below {
        lo + u
    } else {
        t + m + (u - below)
    }
}

pub fn synthetic_shapes<T: Scalar>(config: &SyntheticConfig) -> Result<Dataset<T>> {
    config.validate()?;
    let mut rng = rng::seeded(config.seed);
    let mut samples = Vec::with_capacity(config.count * config.height * config.width * config.channels);
    let mut labels = Vec::with_capacity(config.count);
    let mut latents = Vec::with_capacity(config.count);
    for _ in 0..config.count {
        let size = draw_quality(&mut rng, config.size_range, config.size_threshold, config.margin);
        let brightness = draw_quality(&mut rng, config.brightness_range, config.brightness_threshold, config.margin);
        samples.extend(render_square::<T>(size, brightness, config.height, config.width, config.channels));
        labels.push(label_for(size, brightness, config));
        latents.push(LatentQualities { size, brightness });
    }
    Ok(Dataset::new(
        vec![config.height, config.width, config.channels],
        samples,
        labels,
        SyntheticConfig::property_table(),
    )?
    .with_latents(latents)?
    .with_seed(Some(config.seed)))
}
