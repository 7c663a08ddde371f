//! Beam search over mixed word/phrase derivations, with beams indexed by
//! the number of generated target words.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{ChunkSpan, Vocab, BOS, EOS, PAD};
use crate::error::{Error, Result};
use crate::memory::{Coverage, HypothesisState, PhraseMemory, PreparedSource, SmtModel};
use crate::nmt::{DecoderStep, EncodedSource, Model};
use crate::numerics::ops::{argmax, log_softmax};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BeamConfig {
    pub width: usize,
    pub max_len: usize,
    pub n_best: usize,
}

impl Default for BeamConfig {
    fn default() -> Self {
        BeamConfig { width: 10, max_len: 80, n_best: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FragmentRecord {
    #[serde(rename = "type")]
    pub kind: FragmentKind,
    pub tokens: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<ChunkSpan>,
    /// Log-probability of this successor.
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FragmentKind {
    Word,
    Phrase,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    /// Generated ids, EOS included once finished.
    pub ids: Vec<usize>,
    /// Surface tokens; phrase words keep their table spelling.
    pub tokens: Vec<String>,
    pub fragments: Vec<FragmentRecord>,
    pub state: Vec<f64>,
    pub y_prev: usize,
    pub anchor: Option<usize>,
    pub coverage: Coverage,
    pub logprob: f64,
    pub finished: bool,
}

impl Hypothesis {
    pub fn word_count(&self) -> usize {
        self.ids.len()
    }

    /// Output tokens without EOS.
    pub fn output(&self) -> &[String] {
        let n = if self.finished { self.tokens.len() - 1 } else { self.tokens.len() };
        &self.tokens[..n]
    }

    pub fn normalized_score(&self) -> f64 {
        self.logprob / self.ids.len().max(1) as f64
    }

    pub fn num_phrases(&self) -> usize {
        self.fragments.iter().filter(|f| f.kind == FragmentKind::Phrase).count()
    }

    pub fn trace_json(&self) -> String {
        serde_json::json!({
            "tokens": self.output(),
            "fragments": self.fragments,
            "logprob": self.logprob,
        })
        .to_string()
    }
}

/// Successor scores of one hypothesis over vocabulary and memory.
#[derive(Debug, Clone)]
pub struct Expansion {
    pub step: DecoderStep,
    pub memory: PhraseMemory,
    pub lambda: Option<f64>,
    /// `log((1 - lambda) P_word(w))`, or `log P_word(w)` with an empty memory.
    pub word_logp: Vec<f64>,
    /// `log(lambda P_phrase(p))` per memory entry.
    pub phrase_logp: Vec<f64>,
}

impl Expansion {
    /// Word ids that may be generated.
    pub fn word_candidates(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.word_logp.len()).filter(|&w| w != PAD && w != BOS)
    }
}

/// Per-sentence decoding context: encoded source and phrase representations.
#[derive(Debug, Clone)]
pub struct SentenceContext {
    pub source: PreparedSource,
    pub enc: EncodedSource,
    reps: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub best: Hypothesis,
    pub n_best: Vec<Hypothesis>,
    /// No hypothesis finished within the length limit.
    pub truncated: bool,
}

fn rank_final(a: &Hypothesis, b: &Hypothesis) -> Ordering {
    b.normalized_score()
        .total_cmp(&a.normalized_score())
        .then_with(|| a.ids.cmp(&b.ids))
}

fn rank_beam(a: &Hypothesis, b: &Hypothesis) -> Ordering {
    b.logprob.total_cmp(&a.logprob).then_with(|| a.ids.cmp(&b.ids))
}

pub struct Decoder<'a> {
    pub model: &'a Model,
    pub smt: &'a SmtModel,
    /// Target vocabulary, for spelling generated words.
    pub vocab: &'a Vocab,
    pub config: BeamConfig,
}

impl<'a> Decoder<'a> {
    pub fn new(model: &'a Model, smt: &'a SmtModel, vocab: &'a Vocab, config: BeamConfig) -> Result<Self> {
        if config.width == 0 || config.max_len == 0 || config.n_best == 0 {
            return Err(Error::Config("beam width, max_len and n_best must be positive".into()));
        }
        if vocab.len() != model.config.tgt_vocab {
            return Err(Error::Config("target vocabulary does not match the model".into()));
        }
        Ok(Decoder { model, smt, vocab, config })
    }

    pub fn prepare(&self, source: &PreparedSource) -> Result<SentenceContext> {
        let enc = self.model.encode(&source.input)?;
        let reps = source
            .chunks
            .chunks
            .iter()
            .map(|c| c.candidates.iter().map(|cand| self.model.encode_phrase(&cand.ids)).collect())
            .collect::<Result<_>>()?;
        Ok(SentenceContext { source: source.clone(), enc, reps })
    }

    pub fn initial(&self, ctx: &SentenceContext) -> Hypothesis {
        Hypothesis {
            ids: Vec::new(),
            tokens: Vec::new(),
            fragments: Vec::new(),
            state: ctx.enc.initial_state.clone(),
            y_prev: BOS,
            anchor: None,
            coverage: Coverage::new(ctx.source.sentence.len()),
            logprob: 0.0,
            finished: false,
        }
    }

    pub fn write_memory(&self, ctx: &SentenceContext, hyp: &Hypothesis) -> PhraseMemory {
        let state = HypothesisState { history: &hyp.tokens, coverage: &hyp.coverage, anchor: hyp.anchor };
        ctx.source.chunks.write_memory(self.smt, &state)
    }

    /// One decoder step, a fresh memory and the scores of every successor.
    pub fn expand(&self, ctx: &SentenceContext, hyp: &Hypothesis) -> Expansion {
        let m = self.model;
        let step = m.decoder_step(&hyp.state, hyp.y_prev, &ctx.enc);
        let memory = self.write_memory(ctx, hyp);
        let mut word_logp = m.word_log_distribution(&step);
        if memory.is_empty() {
            return Expansion { step, memory, lambda: None, word_logp, phrase_logp: Vec::new() };
        }
        let (log_l, log_1l) = m.balancer_logs(&step);
        word_logp.iter_mut().for_each(|v| *v += log_1l);
        let reps: Vec<&[f64]> = memory.entries.iter().map(|e| ctx.reps[e.key.0][e.key.1].as_slice()).collect();
        let phrase_logp = log_softmax(&m.phrase_scores(&step, &reps)).into_iter().map(|v| v + log_l).collect();
        Expansion { step, memory, lambda: Some(log_l.exp()), word_logp, phrase_logp }
    }

    pub fn word_successor(&self, hyp: &Hypothesis, exp: &Expansion, w: usize) -> Hypothesis {
        let score = exp.word_logp[w];
        let token = self.vocab.token(w).to_string();
        let mut next = Hypothesis {
            ids: hyp.ids.clone(),
            tokens: hyp.tokens.clone(),
            fragments: hyp.fragments.clone(),
            state: exp.step.state.clone(),
            y_prev: w,
            anchor: Some(argmax(&exp.step.attention)),
            coverage: hyp.coverage.clone(),
            logprob: hyp.logprob + score,
            finished: w == EOS,
        };
        next.ids.push(w);
        next.tokens.push(token.clone());
        next.fragments.push(FragmentRecord { kind: FragmentKind::Word, tokens: vec![token], span: None, score });
        next
    }

    /// Adopts memory entry `k`: the remaining phrase words are fed through
    /// the decoder one step each, with no further emission terms.
    pub fn consume_phrase(&self, ctx: &SentenceContext, hyp: &Hypothesis, exp: &Expansion, k: usize) -> Hypothesis {
        let entry = &exp.memory.entries[k];
        let score = exp.phrase_logp[k];
        let mut state = exp.step.state.clone();
        let mut attention = exp.step.attention.clone();
        for &w in &entry.ids[..entry.ids.len() - 1] {
            let st = self.model.decoder_step(&state, w, &ctx.enc);
            state = st.state;
            attention = st.attention;
        }
        let mut ids = hyp.ids.clone();
        ids.extend_from_slice(&entry.ids);
        let mut tokens = hyp.tokens.clone();
        tokens.extend_from_slice(&entry.tokens);
        let mut fragments = hyp.fragments.clone();
        fragments.push(FragmentRecord {
            kind: FragmentKind::Phrase,
            tokens: entry.tokens.clone(),
            span: Some(entry.span.clone()),
            score,
        });
        Hypothesis {
            ids,
            tokens,
            fragments,
            state,
            y_prev: *entry.ids.last().expect("phrases have at least two words"),
            anchor: Some(argmax(&attention)),
            coverage: hyp.coverage.apply_phrase(&entry.span).expect("memory entries avoid covered spans"),
            logprob: hyp.logprob + score,
            finished: false,
        }
    }

    pub fn search(&self, source: &PreparedSource) -> Result<SearchResult> {
        let ctx = self.prepare(source)?;
        Ok(self.search_prepared(&ctx))
    }

    pub fn search_prepared(&self, ctx: &SentenceContext) -> SearchResult {
        let BeamConfig { width, max_len, n_best } = self.config;
        let mut beams: Vec<Vec<Hypothesis>> = vec![Vec::new(); max_len + 1];
        beams[0].push(self.initial(ctx));
        let mut finished: Vec<Hypothesis> = Vec::new();
        let mut alive: Vec<Hypothesis> = Vec::new();
        for n in 0..=max_len {
            let mut beam = std::mem::take(&mut beams[n]);
            if beam.is_empty() {
                continue;
            }
            beam.sort_by(rank_beam);
            beam.truncate(width);
            let (done, open): (Vec<_>, Vec<_>) = beam.into_iter().partition(|h| h.finished);
            finished.extend(done);
            if open.is_empty() {
                continue;
            }
            if n == max_len {
                alive = open;
                break;
            }
            alive = open.clone();
            for hyp in &open {
                let exp = self.expand(ctx, hyp);
                let mut words: Vec<usize> = exp.word_candidates().collect();
                words.sort_by(|&a, &b| exp.word_logp[b].total_cmp(&exp.word_logp[a]).then(a.cmp(&b)));
                words.truncate(width);
                for w in words {
                    beams[n + 1].push(self.word_successor(hyp, &exp, w));
                }
                for k in 0..exp.memory.len() {
                    let len = exp.memory.entries[k].ids.len();
                    if n + len <= max_len {
                        beams[n + len].push(self.consume_phrase(ctx, hyp, &exp, k));
                    }
                }
            }
        }
        let truncated = finished.is_empty();
        let mut pool = if truncated { alive } else { finished };
        pool.sort_by(rank_final);
        pool.truncate(n_best);
        let best = pool.first().cloned().unwrap_or_else(|| self.initial(ctx));
        SearchResult { best, n_best: pool, truncated }
    }

    /// Decodes sentences in parallel; results keep the input order.
    pub fn search_all(&self, sources: &[PreparedSource]) -> Vec<Result<SearchResult>> {
        sources.par_iter().map(|s| self.search(s)).collect()
    }

    /// Replays a hypothesis's derivation and returns the memory written at
    /// each of its steps.
    pub fn replay_memories(&self, ctx: &SentenceContext, hyp: &Hypothesis) -> Result<Vec<PhraseMemory>> {
        let mut cur = self.initial(ctx);
        let mut out = Vec::new();
        for frag in &hyp.fragments {
            let exp = self.expand(ctx, &cur);
            cur = match frag.kind {
                FragmentKind::Word => {
                    let w = self.vocab.id(&frag.tokens[0]);
                    self.word_successor(&cur, &exp, w)
                }
                FragmentKind::Phrase => {
                    let k = exp
                        .memory
                        .entries
                        .iter()
                        .position(|e| e.tokens == frag.tokens && Some(&e.span) == frag.span.as_ref())
                        .ok_or_else(|| Error::InvalidArgument("phrase fragment not in the memory snapshot".into()))?;
                    self.consume_phrase(ctx, &cur, &exp, k)
                }
            };
            out.push(exp.memory);
        }
        Ok(out)
    }
}
