mod analysis;
mod bleu;

pub use analysis::{constant_lambda_mode, null_ablation, phrase_usage, PhraseUsageReport, SentenceTrace, UsageCell, NULL_TOKEN};
pub use bleu::{bleu, BleuReport};
