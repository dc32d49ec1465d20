//! A small, trainable hybrid long-convolution / DeltaNet forecaster for
//! univariate time series.
//!
//! The crate covers the full pipeline: numerical kernels with analytic
//! gradients ([`numerics`]), the four network blocks ([`layers`]), the
//! assembled patch forecaster ([`model`]), synthetic corpora ([`synthgen`]),
//! the augmentation pipeline ([`augment`]), training ([`trainer`]),
//! inference strategies ([`inference`]) and evaluation ([`harness`]).

pub mod augment;
pub mod corpus;
pub mod error;
pub mod harness;
pub mod inference;
pub mod layers;
pub mod model;
pub mod numerics;
pub mod rng;
pub mod synthgen;
pub mod trainer;

pub use error::{Error, Result};
pub use numerics::Tensor2;
pub use rng::RngStream;
