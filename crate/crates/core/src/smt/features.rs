use crate::error::{Error, Result};

pub const NUM_FEATURES: usize = 6;

/// Feature order used by every feature vector in the crate.
pub const FEATURE_NAMES: [&str; NUM_FEATURES] = [
    "logp_tgt_given_src",
    "logp_src_given_tgt",
    "lm",
    "word_penalty",
    "distortion",
    "phrase_penalty",
];

/// Log-linear weights for the six phrase features.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmtFeatureWeights(pub [f64; NUM_FEATURES]);

impl Default for SmtFeatureWeights {
    fn default() -> Self {
        SmtFeatureWeights([1.0, 1.0, 1.0, -0.3, 0.3, 0.0])
    }
}

impl SmtFeatureWeights {
    pub fn new(w: [f64; NUM_FEATURES]) -> Result<Self> {
        if w.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config("feature weights must be finite".into()));
        }
        Ok(SmtFeatureWeights(w))
    }

    pub fn score(&self, features: &[f64; NUM_FEATURES]) -> f64 {
        self.0.iter().zip(features).map(|(w, h)| w * h).sum()
    }
}

/// `sum_m w_m * h_m`.
pub fn smt_score(features: &[f64], weights: &[f64]) -> Result<f64> {
    if features.len() != weights.len() {
        return Err(Error::InvalidArgument(format!(
            "{} features but {} weights",
            features.len(),
            weights.len()
        )));
    }
    Ok(features.iter().zip(weights).map(|(h, w)| h * w).sum())
}
