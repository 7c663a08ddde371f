use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ModelConfig;
use crate::config::{format_kv, parse_kv};
use crate::data::Vocab;
use crate::error::{Error, Result};
use crate::numerics::ops::{log_softmax, sigmoid, softmax_unchecked};
use crate::numerics::{
    read_checkpoint, write_checkpoint, Activation, FeedForward, GruCell, Linear, ParamId, ParamStore,
};

/// Source, target and chunk-tag vocabularies of one model.
#[derive(Debug, Clone)]
pub struct Vocabs {
    pub src: Vocab,
    pub tgt: Vocab,
    pub tag: Vocab,
}

/// Source sentence as vocabulary ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceInput {
    pub tokens: Vec<usize>,
    pub tags: Vec<usize>,
}

impl SourceInput {
    pub fn new<S: AsRef<str>, T: AsRef<str>>(vocabs: &Vocabs, tokens: &[S], tags: &[T]) -> Self {
        SourceInput {
            tokens: vocabs.src.ids(tokens),
            tags: vocabs.tag.ids(tags),
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Encoder output: one annotation `[forward; backward]` per source word.
#[derive(Debug, Clone)]
pub struct EncodedSource {
    pub annotations: Vec<Vec<f64>>,
    /// Attention projections of the annotations.
    pub(crate) proj: Vec<Vec<f64>>,
    pub initial_state: Vec<f64>,
}

impl EncodedSource {
    pub fn len(&self) -> usize {
        self.annotations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.annotations.is_empty()
    }
}

/// Result of one decoder recurrence.
#[derive(Debug, Clone)]
pub struct DecoderStep {
    pub state: Vec<f64>,
    pub context: Vec<f64>,
    pub attention: Vec<f64>,
    pub y_prev: usize,
    /// `[state; E y_prev; context]`, shared by all output heads.
    pub(crate) readout: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct Layout {
    pub src_emb: ParamId,
    pub tgt_emb: ParamId,
    pub tag_emb: Option<ParamId>,
    pub enc_fwd: GruCell,
    pub enc_bwd: GruCell,
    pub init: Linear,
    pub att_state: Linear,
    pub att_annot: Linear,
    pub att_v: ParamId,
    pub dec: GruCell,
    pub out_hidden: Linear,
    pub out_vocab: Linear,
    pub balancer: FeedForward,
    pub scorer_phrase: Linear,
    pub scorer_ctx: Linear,
    pub scorer_rest: FeedForward,
    pub phrase_enc: GruCell,
}

/// Attention encoder-decoder with balancer and phrase scorer.
#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ParamStore,
    pub(crate) layout: Layout,
}

impl Model {
    /// Weights uniform in `[-init_scale, init_scale]`, biases zero.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let c = &config;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = ParamStore::new();
        let s = c.init_scale;
        let h = c.hidden;
        let r = c.readout_dim();

        let src_emb = p.add_uniform("emb.src", &[c.src_vocab, c.word_dim], s, &mut rng);
        let tgt_emb = p.add_uniform("emb.tgt", &[c.tgt_vocab, c.word_dim], s, &mut rng);
        let tag_emb = (c.tag_dim > 0).then(|| p.add_uniform("emb.tag", &[c.tag_vocab, c.tag_dim], s, &mut rng));
        let enc_in = c.word_dim + c.tag_dim;
        let enc_fwd = GruCell::new(&mut p, "enc.fwd", enc_in, h, s, &mut rng);
        let enc_bwd = GruCell::new(&mut p, "enc.bwd", enc_in, h, s, &mut rng);
        let init = Linear::new(&mut p, "dec.init", h, h, true, s, &mut rng);
        let att_state = Linear::new(&mut p, "att.state", h, c.att_dim, false, s, &mut rng);
        let att_annot = Linear::new(&mut p, "att.annot", 2 * h, c.att_dim, false, s, &mut rng);
        let att_v = p.add_uniform("att.v", &[c.att_dim], s, &mut rng);
        let dec = GruCell::new(&mut p, "dec.gru", c.word_dim + 2 * h, h, s, &mut rng);
        let out_hidden = Linear::new(&mut p, "out.hidden", r, c.out_hidden, true, s, &mut rng);
        let out_vocab = Linear::new(&mut p, "out.vocab", c.out_hidden, c.tgt_vocab, true, s, &mut rng);
        let [b1, b2] = c.balancer_hidden;
        let balancer = FeedForward::new(vec![
            (Linear::new(&mut p, "bal.l1", r, b1, true, s, &mut rng), Activation::Tanh),
            (Linear::new(&mut p, "bal.l2", b1, b2, true, s, &mut rng), Activation::Tanh),
            (Linear::new(&mut p, "bal.l3", b2, 1, true, s, &mut rng), Activation::Identity),
        ])?;
        let [s1, s2] = c.scorer_hidden;
        let scorer_phrase = Linear::new(&mut p, "score.phrase", h, s1, false, s, &mut rng);
        let scorer_ctx = Linear::new(&mut p, "score.ctx", r, s1, true, s, &mut rng);
        let scorer_rest = FeedForward::new(vec![
            (Linear::new(&mut p, "score.l2", s1, s2, true, s, &mut rng), Activation::Tanh),
            (Linear::new(&mut p, "score.l3", s2, 1, true, s, &mut rng), Activation::Identity),
        ])?;
        let phrase_enc = GruCell::new(&mut p, "phrase.gru", c.word_dim, h, s, &mut rng);

        Ok(Model {
            config,
            params: p,
            layout: Layout {
                src_emb,
                tgt_emb,
                tag_emb,
                enc_fwd,
                enc_bwd,
                init,
                att_state,
                att_annot,
                att_v,
                dec,
                out_hidden,
                out_vocab,
                balancer,
                scorer_phrase,
                scorer_ctx,
                scorer_rest,
                phrase_enc,
            },
        })
    }

    /// Same parameters, balancer output pinned to `value`.
    pub fn with_constant_lambda(&self, value: f64) -> Result<Model> {
        let mut m = self.clone();
        m.config.constant_lambda = Some(value);
        m.config.validate()?;
        Ok(m)
    }

    pub fn encode(&self, src: &SourceInput) -> Result<EncodedSource> {
        self.check_source(src)?;
        Ok(self.encode_fwd(src).0)
    }

    pub(crate) fn check_source(&self, src: &SourceInput) -> Result<()> {
        if src.is_empty() {
            return Err(Error::InvalidArgument("cannot encode an empty sentence".into()));
        }
        if src.tags.len() != src.tokens.len() {
            return Err(Error::InvalidArgument("one tag per source token required".into()));
        }
        let bad = src.tokens.iter().any(|&t| t >= self.config.src_vocab)
            || src.tags.iter().any(|&t| t >= self.config.tag_vocab);
        if bad {
            return Err(Error::InvalidArgument("source id outside the vocabulary".into()));
        }
        Ok(())
    }

    /// Context vector and attention weights for the previous state.
    pub fn attend(&self, s_prev: &[f64], enc: &EncodedSource) -> (Vec<f64>, Vec<f64>) {
        let (c, cache) = self.attend_fwd(s_prev, enc);
        (c, cache.alpha)
    }

    pub fn decoder_step(&self, s_prev: &[f64], y_prev: usize, enc: &EncodedSource) -> DecoderStep {
        self.decoder_step_fwd(s_prev, y_prev, enc).0
    }

    pub fn word_logits(&self, step: &DecoderStep) -> Vec<f64> {
        self.output_fwd::<ChaCha8Rng>(&step.readout, None).logits
    }

    /// Distribution over the target vocabulary (inference, no dropout).
    pub fn word_distribution(&self, step: &DecoderStep) -> Vec<f64> {
        softmax_unchecked(&self.word_logits(step))
    }

    pub fn word_log_distribution(&self, step: &DecoderStep) -> Vec<f64> {
        log_softmax(&self.word_logits(step))
    }

    /// Pre-sigmoid balancer output; `None` when lambda is pinned.
    pub fn balancer_logit(&self, step: &DecoderStep) -> Option<f64> {
        match self.config.constant_lambda {
            Some(_) => None,
            None => Some(self.balancer_fwd(&step.readout).0),
        }
    }

    /// Weight of the phrase mode, strictly inside (0, 1) unless it saturates.
    pub fn balancer(&self, step: &DecoderStep) -> f64 {
        match self.config.constant_lambda {
            Some(l) => l,
            None => sigmoid(self.balancer_fwd(&step.readout).0),
        }
    }

    /// `(ln lambda, ln(1 - lambda))`, computed stably.
    pub fn balancer_logs(&self, step: &DecoderStep) -> (f64, f64) {
        match self.config.constant_lambda {
            Some(l) => (l.ln(), (1.0 - l).ln()),
            None => {
                let u = self.balancer_fwd(&step.readout).0;
                (
                    crate::numerics::ops::log_sigmoid(u),
                    crate::numerics::ops::log_sigmoid(-u),
                )
            }
        }
    }

    /// Final state of a backward GRU over the phrase's target embeddings.
    pub fn encode_phrase(&self, ids: &[usize]) -> Result<Vec<f64>> {
        if ids.len() < 2 || ids.len() > self.config.max_phrase_len {
            return Err(Error::InvalidArgument(format!(
                "phrase length {} outside [2, {}]",
                ids.len(),
                self.config.max_phrase_len
            )));
        }
        if ids.iter().any(|&t| t >= self.config.tgt_vocab) {
            return Err(Error::InvalidArgument("phrase id outside the vocabulary".into()));
        }
        Ok(self.phrase_fwd(ids).rep)
    }

    pub fn phrase_scores(&self, step: &DecoderStep, reps: &[&[f64]]) -> Vec<f64> {
        self.scorer_fwd(&step.readout, reps).scores
    }

    /// Softmax of the phrase scores over the memory entries.
    pub fn phrase_distribution(&self, step: &DecoderStep, reps: &[&[f64]]) -> Result<Vec<f64>> {
        if reps.is_empty() {
            return Err(Error::InvalidArgument("phrase distribution over an empty memory".into()));
        }
        Ok(softmax_unchecked(&self.phrase_scores(step, reps)))
    }

    pub fn checkpoint_tensors(&self) -> Vec<(String, crate::numerics::Tensor)> {
        self.params.named_values()
    }

    /// Writes the parameter container and a `<path>.cfg` sidecar holding the
    /// model dimensions plus `extra` keys.
    pub fn save(&self, path: impl AsRef<Path>, extra: &BTreeMap<String, String>) -> Result<()> {
        write_checkpoint(path.as_ref(), &self.checkpoint_tensors())?;
        let mut m = self.config.to_map();
        for (k, v) in extra {
            m.entry(k.clone()).or_insert_with(|| v.clone());
        }
        let side = sidecar_path(path.as_ref());
        std::fs::write(&side, format_kv(&m)).map_err(|e| Error::io(&side, e))
    }

    /// Loads a checkpoint and its sidecar; returns the sidecar map too.
    pub fn load(path: impl AsRef<Path>) -> Result<(Model, BTreeMap<String, String>)> {
        let side = sidecar_path(path.as_ref());
        let text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
        let map = parse_kv(&text)?;
        let config = ModelConfig::from_map(&map)?;
        let mut model = Model::new(config, 0)?;
        model.params.load_named(&read_checkpoint(path)?)?;
        Ok((model, map))
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".cfg");
    PathBuf::from(s)
}
