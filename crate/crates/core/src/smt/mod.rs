//! Phrase-based SMT components feeding the phrase memory.

mod align;
mod extract;
mod features;
mod lm;
mod table;

pub use align::{
    format_pharaoh, grow_diag_final, ibm1_align, parse_pharaoh, AlignmentMatrix, Direction, Ibm1Model,
};
pub use extract::{extract_phrases, extract_phrases_brute_force, PhraseSpanPair};
pub use features::{smt_score, SmtFeatureWeights, FEATURE_NAMES, NUM_FEATURES};
pub use lm::NGramLM;
pub use table::{build_phrase_table, PhraseTable, PhraseTranslation, DEFAULT_MAX_PHRASE_LEN};
