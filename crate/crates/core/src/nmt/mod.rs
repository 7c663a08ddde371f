//! The neural translation model.
//!
//! Forward functions return caches consumed by the matching backward
//! functions; the public inference API wraps them and drops the caches.

mod config;
mod model;
mod layers;

pub use config::ModelConfig;
pub use model::{DecoderStep, EncodedSource, Model, SourceInput, Vocabs};

pub(crate) use layers::{DecoderStepCache, EncoderCache, PhraseEncoding};
