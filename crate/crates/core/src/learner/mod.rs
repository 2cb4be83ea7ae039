//! Joint training of the autoencoder and the prototype classifier module,
//! plus the two comparison baselines.

mod baselines;
mod config;
mod fit;
mod loss;
mod prototypes;

pub use baselines::{
    classifier_network, train_autoencoder_baseline, train_classifier_baseline, AutoencoderOutcome, BaselineReport,
    ClassifierOutcome,
};
pub use config::{LossWeights, RegParams, TrainConfig};
pub use fit::{
    batch_objective, fit, fit_with, BatchOutcome, DomainModel, EpochReport, FitOptions, FitOutcome, PrototypeDraw,
};
pub use loss::{
    classification_active, classification_loss, classifier_terms, distortion_reg, one_hot, reconstruction_grad,
    reconstruction_loss, total_loss, ClassifierTerms, LossBreakdown, PROB_FLOOR,
};
pub use prototypes::{class_means, update_prototypes};

#[cfg(test)]
mod tests;
