//! End-to-end helpers shared by the command line and the experiments.

use crate::data::{build_vocab, ParallelExample, Side};
use crate::decoder::{Decoder, SearchResult};
use crate::error::Result;
use crate::memory::{PreparedSource, SmtModel};
use crate::nmt::Vocabs;
use crate::smt::{build_phrase_table, extract_phrases, ibm1_align, AlignmentMatrix, NGramLM, PhraseTable, SmtFeatureWeights};
use crate::trainer::PreparedExample;

#[derive(Debug, Clone, PartialEq)]
pub struct SmtSettings {
    pub align_iterations: usize,
    pub max_phrase_len: usize,
    pub lm_order: usize,
    pub lm_discount: f64,
    pub weights: SmtFeatureWeights,
    pub memory_size: usize,
    pub candidates_per_chunk: usize,
}

impl Default for SmtSettings {
    fn default() -> Self {
        SmtSettings {
            align_iterations: 5,
            max_phrase_len: crate::smt::DEFAULT_MAX_PHRASE_LEN,
            lm_order: NGramLM::DEFAULT_ORDER,
            lm_discount: NGramLM::DEFAULT_DISCOUNT,
            weights: SmtFeatureWeights::default(),
            memory_size: crate::memory::DEFAULT_MEMORY_SIZE,
            candidates_per_chunk: crate::memory::DEFAULT_CANDIDATES_PER_CHUNK,
        }
    }
}

fn token_pairs(examples: &[ParallelExample]) -> Vec<(Vec<String>, Vec<String>)> {
    examples.iter().map(|e| (e.source.tokens.clone(), e.target.clone())).collect()
}

pub fn align_corpus(examples: &[ParallelExample], iterations: usize) -> Result<Vec<AlignmentMatrix>> {
    ibm1_align(&token_pairs(examples), iterations)
}

pub fn extract_table(examples: &[ParallelExample], alignments: &[AlignmentMatrix], max_len: usize) -> PhraseTable {
    let pairs = examples.iter().zip(alignments).flat_map(|(e, a)| {
        extract_phrases(a, max_len).into_iter().map(move |p| {
            (
                e.source.tokens[p.src_start..p.src_end].to_vec(),
                e.target[p.tgt_start..p.tgt_end].to_vec(),
            )
        })
    });
    build_phrase_table(pairs)
}

pub fn train_lm(examples: &[ParallelExample], order: usize, discount: f64) -> Result<NGramLM> {
    let sents: Vec<Vec<String>> = examples.iter().map(|e| e.target.clone()).collect();
    NGramLM::train(&sents, order, discount)
}

pub fn assemble_smt(table: PhraseTable, lm: NGramLM, s: &SmtSettings) -> SmtModel {
    let mut smt = SmtModel::new(table, lm, s.weights.clone());
    smt.memory_size = s.memory_size;
    smt.candidates_per_chunk = s.candidates_per_chunk;
    smt
}

/// Alignment, phrase extraction and LM training in one go.
pub fn build_smt(examples: &[ParallelExample], s: &SmtSettings) -> Result<SmtModel> {
    let alignments = align_corpus(examples, s.align_iterations)?;
    let table = extract_table(examples, &alignments, s.max_phrase_len);
    let lm = train_lm(examples, s.lm_order, s.lm_discount)?;
    Ok(assemble_smt(table, lm, s))
}

pub fn build_vocabs(examples: &[ParallelExample], src_max: Option<usize>, tgt_max: Option<usize>) -> Vocabs {
    Vocabs {
        src: build_vocab(examples, Side::Source, src_max),
        tgt: build_vocab(examples, Side::Target, tgt_max),
        tag: build_vocab(examples, Side::Tag, None),
    }
}

pub fn prepare_examples(
    examples: &[ParallelExample],
    vocabs: &Vocabs,
    smt: &SmtModel,
    max_phrase_len: usize,
) -> Vec<PreparedExample> {
    examples.iter().map(|e| PreparedExample::new(e, vocabs, smt, max_phrase_len)).collect()
}

pub fn prepare_sources(
    examples: &[ParallelExample],
    vocabs: &Vocabs,
    smt: &SmtModel,
    max_phrase_len: usize,
) -> Vec<PreparedSource> {
    examples
        .iter()
        .map(|e| PreparedSource::new(e.source.clone(), vocabs, smt, max_phrase_len))
        .collect()
}

/// Decodes every source, failing on the first error.
pub fn translate_all(decoder: &Decoder, sources: &[PreparedSource]) -> Result<Vec<SearchResult>> {
    decoder.search_all(sources).into_iter().collect()
}
