//! Adverse-event detection from free-text clinical narratives.
//!
//! The crate covers the whole experiment pipeline: a seeded synthetic note
//! generator with keyword prefiltering and split validation ([`corpus`]),
//! stemmed n-gram preprocessing ([`preprocess`]), classical bag-of-n-grams
//! baselines ([`classical`]), from-scratch BiLSTM and CNN text classifiers on
//! a minimal dense-tensor kernel ([`numkit`], [`dlmodels`]), and evaluation
//! with Cohen's Kappa and code-capture analysis ([`eval`]).
//!
//! Numeric code is generic over [`scalar::Scalar`]; the `f64` aliases below
//! are the reference types used everywhere in the shipped pipeline.

pub mod classical;
pub mod corpus;
pub mod dlmodels;
pub mod eval;
pub mod experiment;
pub mod numkit;
pub mod preprocess;
pub mod scalar;

/// Default tensor type for the shipped pipeline.
pub type Tensor64 = numkit::Tensor<f64>;
/// Single-precision tensor, for callers that trade accuracy for memory.
pub type Tensor32 = numkit::Tensor<f32>;
/// Default parameter set.
pub type ParamSet64 = numkit::ParamSet<f64>;
/// Default deep-model type.
pub type TrainedModel64 = dlmodels::TrainedModel<f64>;
