use crate::data::{ParallelExample, BOS, EOS};
use crate::error::Result;
use crate::memory::{Coverage, HypothesisState, PhraseMemory, PreparedSource, SmtModel};
use crate::nmt::{Model, Vocabs};
use crate::numerics::ops::argmax;

/// Source side plus the reference as tokens and ids.
#[derive(Debug, Clone)]
pub struct PreparedExample {
    pub source: PreparedSource,
    pub target: Vec<String>,
    pub target_ids: Vec<usize>,
}

impl PreparedExample {
    pub fn new(example: &ParallelExample, vocabs: &Vocabs, smt: &SmtModel, max_phrase_len: usize) -> Self {
        PreparedExample {
            source: PreparedSource::new(example.source.clone(), vocabs, smt, max_phrase_len),
            target: example.target.clone(),
            target_ids: vocabs.tgt.ids(&example.target),
        }
    }

    /// Decoder input at every teacher-forced step, EOS step included.
    pub(crate) fn inputs(&self) -> Vec<usize> {
        std::iter::once(BOS).chain(self.target_ids.iter().copied()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Fragment {
    Word(usize),
    /// Index into the memory snapshot of this fragment.
    Phrase { entry: usize, len: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentedFragment {
    /// Target position at which the fragment starts.
    pub step: usize,
    pub fragment: Fragment,
    pub memory: PhraseMemory,
}

/// Reference split into word and phrase fragments, EOS last.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SegmentedReference {
    pub fragments: Vec<SegmentedFragment>,
}

impl SegmentedReference {
    /// Target ids spelled out by the fragments, EOS included.
    pub fn reassemble(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for f in &self.fragments {
            match f.fragment {
                Fragment::Word(w) => out.push(w),
                Fragment::Phrase { entry, .. } => out.extend_from_slice(&f.memory.entries[entry].ids),
            }
        }
        out
    }

    pub fn num_phrases(&self) -> usize {
        self.fragments.iter().filter(|f| matches!(f.fragment, Fragment::Phrase { .. })).count()
    }
}

/// Greedy longest match against the memory written for the gold prefix.
/// `attention[i]` is the attention of teacher-forced step `i`.
pub(crate) fn segment_with_attention(smt: &SmtModel, ex: &PreparedExample, attention: &[Vec<f64>]) -> SegmentedReference {
    let n = ex.target.len();
    let mut coverage = Coverage::new(ex.source.sentence.len());
    let mut fragments = Vec::new();
    let mut i = 0;
    while i <= n {
        let anchor = (i > 0).then(|| argmax(&attention[i - 1]));
        let state = HypothesisState {
            history: &ex.target[..i],
            coverage: &coverage,
            anchor,
        };
        let memory = ex.source.chunks.write_memory(smt, &state);
        let mut best: Option<usize> = None;
        if i < n {
            for (k, e) in memory.entries.iter().enumerate() {
                let fits = ex.target[i..].starts_with(&e.tokens);
                if fits && best.map_or(true, |b| e.tokens.len() > memory.entries[b].tokens.len()) {
                    best = Some(k);
                }
            }
        }
        match best {
            Some(k) => {
                let len = memory.entries[k].tokens.len();
                coverage = coverage
                    .apply_phrase(&memory.entries[k].span)
                    .expect("memory entries avoid covered spans");
                fragments.push(SegmentedFragment { step: i, fragment: Fragment::Phrase { entry: k, len }, memory });
                i += len;
            }
            None => {
                let w = if i < n { ex.target_ids[i] } else { EOS };
                fragments.push(SegmentedFragment { step: i, fragment: Fragment::Word(w), memory });
                i += 1;
            }
        }
    }
    SegmentedReference { fragments }
}

/// Segments the reference using the model's teacher-forced attention for
/// the distortion feature.
pub fn segment_reference(model: &Model, smt: &SmtModel, ex: &PreparedExample) -> Result<SegmentedReference> {
    let enc = model.encode(&ex.source.input)?;
    let mut s = enc.initial_state.clone();
    let mut attention = Vec::with_capacity(ex.target.len() + 1);
    for y in ex.inputs() {
        let step = model.decoder_step(&s, y, &enc);
        attention.push(step.attention);
        s = step.state;
    }
    Ok(segment_with_attention(smt, ex, &attention))
}
