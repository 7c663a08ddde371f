//! Attention-based neural machine translation with a phrase memory.
//!
//! At every decoding step an SMT subsystem (phrase table, n-gram LM and a
//! log-linear scorer) rewrites a small memory of target phrases recommended
//! for the uncovered source chunks. The decoder then either emits a single
//! word from its vocabulary or adopts a whole phrase from the memory, with a
//! learned balancer splitting probability mass between the two modes.
//!
//! Module map:
//! - [`numerics`]: dense tensors, GRU / feed-forward layers with manual
//!   gradients, gradient checking, checkpoint container.
//! - [`data`]: corpora, chunk annotations, vocabularies, toy corpus generator.
//! - [`smt`]: IBM Model 1 alignment, grow-diag-final, phrase extraction,
//!   phrase table, n-gram LM, feature scoring.
//! - [`nmt`]: the neural model.
//! - [`memory`]: per-step phrase memory.
//! - [`trainer`]: reference segmentation, mixed likelihood, Adadelta.
//! - [`decoder`]: mixed word/phrase beam search.
//! - [`eval`]: BLEU and phrase-usage analyses.
//! - [`config`]: the key = value run configuration.

pub mod config;
pub mod data;
pub mod decoder;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod memory;
pub mod nmt;
pub mod numerics;
pub mod pipeline;
pub mod smt;
pub mod trainer;
#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
