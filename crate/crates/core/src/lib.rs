//! Learning one domain of a conceptual space from labelled raw data.
//!
//! An autoencoder maps samples to a low-dimensional domain; a classifier
//! module without trainable layers scores each encoding against a set of
//! property prototypes by semantic similarity. Training alternates gradient
//! steps on the encoder/decoder with centroid updates of the prototypes.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` for training, `f64`
//! for gradient checks). The aliases below pin the common choices.

pub mod data;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod learner;
pub mod net;
pub mod rng;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Tensor32 = net::Tensor<f32>;
pub type Tensor64 = net::Tensor<f64>;
pub type Params32 = net::Params<f32>;
pub type Params64 = net::Params<f64>;
pub type DomainPoint32 = geometry::DomainPoint<f32>;
pub type DomainPoint64 = geometry::DomainPoint<f64>;
pub type PrototypeSet32 = geometry::PrototypeSet<f32>;
pub type PrototypeSet64 = geometry::PrototypeSet<f64>;
pub type Dataset32 = data::Dataset<f32>;
pub type Dataset64 = data::Dataset<f64>;
