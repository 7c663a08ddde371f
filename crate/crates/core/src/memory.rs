use std::cmp::Ordering;

use serde::Serialize;

use crate::data::{ChunkSpan, TaggedSentence, Vocab};
use crate::error::{Error, Result};
use crate::nmt::{SourceInput, Vocabs};
use crate::smt::{NGramLM, PhraseTable, PhraseTranslation, SmtFeatureWeights, NUM_FEATURES};

pub const DEFAULT_MEMORY_SIZE: usize = 7;
pub const DEFAULT_CANDIDATES_PER_CHUNK: usize = 5;

/// The SMT side of the hybrid: phrase table, LM and log-linear weights.
#[derive(Debug, Clone)]
pub struct SmtModel {
    pub table: PhraseTable,
    pub lm: NGramLM,
    pub weights: SmtFeatureWeights,
    pub memory_size: usize,
    pub candidates_per_chunk: usize,
}

impl SmtModel {
    pub fn new(table: PhraseTable, lm: NGramLM, weights: SmtFeatureWeights) -> Self {
        SmtModel {
            table,
            lm,
            weights,
            memory_size: DEFAULT_MEMORY_SIZE,
            candidates_per_chunk: DEFAULT_CANDIDATES_PER_CHUNK,
        }
    }

    /// Empty table: the memory is always empty and the model is plain NMT.
    pub fn baseline() -> Self {
        let lm = NGramLM::train::<String>(&[], 1, NGramLM::DEFAULT_DISCOUNT).expect("unigram LM with default discount");
        SmtModel::new(PhraseTable::new(), lm, SmtFeatureWeights::default())
    }
}

/// Top translations of a chunk by `log p(t|s) + log p(s|t)`, keeping only
/// multi-word targets of the first `k`.
pub fn candidates_for_chunk<S: AsRef<str>>(table: &PhraseTable, chunk: &[S], k: usize) -> Vec<PhraseTranslation> {
    let mut all: Vec<&PhraseTranslation> = table.lookup(chunk).iter().collect();
    all.sort_by(|a, b| {
        let sa = a.logp_tgt_given_src + a.logp_src_given_tgt;
        let sb = b.logp_tgt_given_src + b.logp_src_given_tgt;
        sb.total_cmp(&sa).then_with(|| a.target.cmp(&b.target))
    });
    all.into_iter().take(k).filter(|t| t.target.len() >= 2).cloned().collect()
}

/// Bitset over source positions covered by adopted phrases.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Coverage {
    len: usize,
    words: Vec<u64>,
}

impl Coverage {
    pub fn new(len: usize) -> Self {
        Coverage { len, words: vec![0; len.div_ceil(64)] }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn is_covered(&self, i: usize) -> bool {
        i < self.len && self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn intersects(&self, start: usize, end: usize) -> bool {
        (start..end).any(|i| self.is_covered(i))
    }

    /// New coverage with `span` set; the span must be in bounds and uncovered.
    pub fn apply_phrase(&self, span: &ChunkSpan) -> Result<Coverage> {
        if span.end > self.len || span.start >= span.end {
            return Err(Error::InvalidArgument(format!(
                "span {}..{} outside coverage of length {}",
                span.start, span.end, self.len
            )));
        }
        if self.intersects(span.start, span.end) {
            return Err(Error::InvalidArgument(format!(
                "span {}..{} overlaps covered positions",
                span.start, span.end
            )));
        }
        let mut next = self.clone();
        for i in span.start..span.end {
            next.words[i / 64] |= 1 << (i % 64);
        }
        Ok(next)
    }
}

/// What the memory writer sees of a hypothesis.
#[derive(Debug, Clone, Copy)]
pub struct HypothesisState<'a> {
    pub history: &'a [String],
    pub coverage: &'a Coverage,
    /// Attention argmax of the step that produced the previous word.
    pub anchor: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MemoryEntry {
    pub tokens: Vec<String>,
    #[serde(skip)]
    pub ids: Vec<usize>,
    pub span: ChunkSpan,
    pub features: [f64; NUM_FEATURES],
    pub score: f64,
    /// (chunk index, candidate index) within the sentence's chunk cache.
    #[serde(skip)]
    pub key: (usize, usize),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PhraseMemory {
    pub entries: Vec<MemoryEntry>,
}

impl PhraseMemory {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_json(&self, step: usize) -> String {
        serde_json::json!({ "step": step, "entries": self.entries }).to_string()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub tokens: Vec<String>,
    pub ids: Vec<usize>,
    pub logp_tgt_given_src: f64,
    pub logp_src_given_tgt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChunkCandidates {
    pub span: ChunkSpan,
    pub candidates: Vec<Candidate>,
}

/// Per-sentence cache of chunk candidates; only the context-dependent
/// features are recomputed when the memory is written.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceChunks {
    pub len: usize,
    pub chunks: Vec<ChunkCandidates>,
}

fn make_candidate(t: &PhraseTranslation, vocab: &Vocab) -> Candidate {
    Candidate {
        tokens: t.target.clone(),
        ids: vocab.ids(&t.target),
        logp_tgt_given_src: t.logp_tgt_given_src,
        logp_src_given_tgt: t.logp_src_given_tgt,
    }
}

fn features(smt: &SmtModel, span: &ChunkSpan, c: &Candidate, state: &HypothesisState) -> [f64; NUM_FEATURES] {
    let a = state.anchor.map_or(-1.0, |a| a as f64);
    [
        c.logp_tgt_given_src,
        c.logp_src_given_tgt,
        smt.lm.continuation_logprob(state.history, &c.tokens),
        c.tokens.len() as f64,
        -(span.start as f64 - a - 1.0).abs(),
        1.0,
    ]
}

fn rank(a: &MemoryEntry, b: &MemoryEntry) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.tokens.cmp(&b.tokens))
        .then_with(|| (a.span.start, a.span.end).cmp(&(b.span.start, b.span.end)))
}

fn finish(mut entries: Vec<MemoryEntry>, k: usize) -> PhraseMemory {
    entries.sort_by(rank);
    entries.dedup_by(|a, b| a.tokens == b.tokens && a.span == b.span);
    entries.truncate(k);
    PhraseMemory { entries }
}

impl SentenceChunks {
    /// Targets longer than `max_len` are dropped.
    pub fn new(smt: &SmtModel, sentence: &TaggedSentence, tgt_vocab: &Vocab, max_len: usize) -> Self {
        let chunks = sentence
            .chunks
            .iter()
            .map(|span| ChunkCandidates {
                span: span.clone(),
                candidates: candidates_for_chunk(
                    &smt.table,
                    &sentence.tokens[span.start..span.end],
                    smt.candidates_per_chunk,
                )
                .iter()
                .filter(|t| t.target.len() <= max_len)
                .map(|t| make_candidate(t, tgt_vocab))
                .collect(),
            })
            .collect();
        SentenceChunks { len: sentence.len(), chunks }
    }

    pub fn has_candidates(&self, span: &ChunkSpan) -> bool {
        self.chunks.iter().any(|c| &c.span == span && !c.candidates.is_empty())
    }

    /// Source tags with candidate-less chunks demoted to the outside tag.
    pub fn effective_tags(&self, sentence: &TaggedSentence) -> Vec<String> {
        sentence.tags_keeping(|span| self.has_candidates(span))
    }

    pub fn candidate(&self, key: (usize, usize)) -> &Candidate {
        &self.chunks[key.0].candidates[key.1]
    }

    /// Erases and rewrites the memory for one hypothesis.
    pub fn write_memory(&self, smt: &SmtModel, state: &HypothesisState) -> PhraseMemory {
        let mut entries = Vec::new();
        for (ci, chunk) in self.chunks.iter().enumerate() {
            if state.coverage.intersects(chunk.span.start, chunk.span.end) {
                continue;
            }
            for (k, c) in chunk.candidates.iter().enumerate() {
                let f = features(smt, &chunk.span, c, state);
                entries.push(MemoryEntry {
                    tokens: c.tokens.clone(),
                    ids: c.ids.clone(),
                    span: chunk.span.clone(),
                    features: f,
                    score: smt.weights.score(&f),
                    key: (ci, k),
                });
            }
        }
        finish(entries, smt.memory_size)
    }
}

/// A source sentence ready for encoding: chunk cache plus ids with
/// candidate-less chunks demoted to the outside tag.
#[derive(Debug, Clone)]
pub struct PreparedSource {
    pub sentence: TaggedSentence,
    pub chunks: SentenceChunks,
    pub input: SourceInput,
}

impl PreparedSource {
    pub fn new(sentence: TaggedSentence, vocabs: &Vocabs, smt: &SmtModel, max_phrase_len: usize) -> Self {
        let chunks = SentenceChunks::new(smt, &sentence, &vocabs.tgt, max_phrase_len);
        let tags = chunks.effective_tags(&sentence);
        let input = SourceInput::new(vocabs, &sentence.tokens, &tags);
        PreparedSource { sentence, chunks, input }
    }
}

/// Memory written straight from the phrase table, without the chunk cache.
pub fn write_memory_uncached(
    smt: &SmtModel,
    sentence: &TaggedSentence,
    tgt_vocab: &Vocab,
    max_len: usize,
    state: &HypothesisState,
) -> PhraseMemory {
    let mut entries = Vec::new();
    for (ci, span) in sentence.chunks.iter().enumerate() {
        if (span.start..span.end).any(|i| state.coverage.is_covered(i)) {
            continue;
        }
        let found = candidates_for_chunk(&smt.table, &sentence.tokens[span.start..span.end], smt.candidates_per_chunk);
        for (k, t) in found.iter().filter(|t| t.target.len() <= max_len).enumerate() {
            let c = make_candidate(t, tgt_vocab);
            let f = features(smt, span, &c, state);
            let score: f64 = smt.weights.0.iter().zip(&f).map(|(w, h)| w * h).sum();
            entries.push(MemoryEntry {
                tokens: c.tokens,
                ids: c.ids,
                span: span.clone(),
                features: f,
                score,
                key: (ci, k),
            });
        }
    }
    finish(entries, smt.memory_size)
}
