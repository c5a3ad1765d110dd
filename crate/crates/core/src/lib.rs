//! Speaker identification with emotion-invariant embeddings.
//!
//! The chain runs from audio to decisions: MFCC front end with energy VAD
//! and CMVN ([`features`]), a diagonal GMM universal background model and
//! Baum–Welch statistics ([`gmm`]), total-variability i-vectors ([`tv`]),
//! LDA/WCCN session compensation ([`compensate`]), the emotion-invariant
//! extractor ([`einv`]) and closed-set cosine identification ([`ident`]).
//! [`synth`] generates labeled corpora with known ground truth and
//! [`pipeline`] wires every stage into one seeded experiment.
//!
//! Numerical code is generic over [`Real`] (`f32` or `f64`); the aliases
//! below name the common concrete instantiations.

pub mod compensate;
pub mod config;
pub mod corpus;
pub mod einv;
pub mod error;
pub mod features;
pub mod gmm;
pub mod ident;
pub mod io;
pub mod labels;
pub mod linalg;
pub mod pipeline;
pub mod scalar;
pub mod synth;
pub mod tv;

pub use error::{Error, Result};
pub use labels::{Emotion, Split};
pub use scalar::Real;

pub type DiagGmm64 = gmm::DiagGmm<f64>;
pub type DiagGmm32 = gmm::DiagGmm<f32>;
pub type TvModel64 = tv::TvModel<f64>;
pub type TvModel32 = tv::TvModel<f32>;
pub type EinvNet64 = einv::EinvNet<f64>;
pub type EinvNet32 = einv::EinvNet<f32>;
pub type FeatureMatrix64 = features::FeatureMatrix<f64>;
pub type FeatureMatrix32 = features::FeatureMatrix<f32>;
pub type CompEmbedding64 = compensate::CompEmbedding<f64>;
pub type CompEmbedding32 = compensate::CompEmbedding<f32>;
