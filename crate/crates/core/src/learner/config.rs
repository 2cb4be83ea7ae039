use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::SimilarityParams;

/// Weights of the reconstruction, classification and distortion terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
}

impl LossWeights {
    pub fn new(alpha: f64, beta: f64, lambda: f64) -> Result<Self> {
        let w = LossWeights { alpha, beta, lambda };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.alpha, self.beta, self.lambda];
        if all.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::invalid(format!("loss weights must be finite and nonnegative: {all:?}")));
        }
        if all.iter().all(|&w| w == 0.0) {
            return Err(Error::invalid("at least one loss weight must be positive"));
        }
        Ok(())
    }
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { alpha: 5.0, beta: 1.0, lambda: 1.0 }
    }
}

/// Scale `k1` and exponent `k2` of the distortion regularizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegParams {
    pub k1: f64,
    pub k2: f64,
}

impl RegParams {
    pub fn new(k1: f64, k2: f64) -> Result<Self> {
        let r = RegParams { k1, k2 };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k1 > 0.0 && self.k1.is_finite()) {
            return Err(Error::invalid(format!("k1 must be positive, got {}", self.k1)));
        }
        if !(self.k2 >= 1.0 && self.k2.is_finite()) {
            return Err(Error::invalid(format!("k2 must be at least 1, got {}", self.k2)));
        }
        Ok(())
    }
}

impl Default for RegParams {
    fn default() -> Self {
        RegParams { k1: 50.0, k2: 5.0 }
    }
}

/// Everything the joint encoder/decoder/prototype training needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batches_per_epoch: usize,
    pub batch_size: usize,
    /// Weight of the previous prototype when mixing in new centroids.
    pub mu: f64,
    pub lr: f64,
    pub seed: u64,
    pub domain_dim: usize,
    pub loss: LossWeights,
    pub reg: RegParams,
    pub sim: SimilarityParams,
}

impl TrainConfig {
    /// Hyperparameters of the MNIST experiment.
    pub fn mnist_defaults() -> Self {
        TrainConfig {
            epochs: 75,
            batches_per_epoch: 250,
            batch_size: 32,
            mu: 0.75,
            lr: 2e-4,
            seed: 0,
            domain_dim: 2,
            loss: LossWeights::default(),
            reg: RegParams::default(),
            sim: SimilarityParams::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batches_per_epoch == 0 || self.batch_size == 0 {
            return Err(Error::invalid("epochs, batches per epoch and batch size must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.mu) {
            return Err(Error::invalid(format!("mu must lie in [0, 1], got {}", self.mu)));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid(format!("learning rate must be positive, got {}", self.lr)));
        }
        if self.domain_dim == 0 {
            return Err(Error::invalid("domain dimension must be at least 1"));
        }
        self.loss.validate()?;
        self.reg.validate()?;
        SimilarityParams::new(self.sim.c)?;
        Ok(())
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::mnist_defaults()
    }
}
