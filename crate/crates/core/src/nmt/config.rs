use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Dimensions and switches of the neural model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub src_vocab: usize,
    pub tgt_vocab: usize,
    pub tag_vocab: usize,
    pub word_dim: usize,
    /// Zero disables tag embeddings (word-only encoder).
    pub tag_dim: usize,
    pub hidden: usize,
    pub att_dim: usize,
    pub out_hidden: usize,
    pub balancer_hidden: [usize; 2],
    pub scorer_hidden: [usize; 2],
    /// Dropout on the input of the vocabulary projection, training only.
    pub dropout: f64,
    pub max_phrase_len: usize,
    /// Replaces the balancer output when set.
    pub constant_lambda: Option<f64>,
    pub init_scale: f64,
}

impl ModelConfig {
    /// Desk-scale defaults.
    pub fn new(src_vocab: usize, tgt_vocab: usize, tag_vocab: usize) -> Self {
        ModelConfig {
            src_vocab,
            tgt_vocab,
            tag_vocab,
            word_dim: 32,
            tag_dim: 8,
            hidden: 64,
            att_dim: 64,
            out_hidden: 64,
            balancer_hidden: [64, 32],
            scorer_hidden: [64, 32],
            dropout: 0.5,
            max_phrase_len: 7,
            constant_lambda: None,
            init_scale: 0.08,
        }
    }

    /// Full-scale sizes: 620-d embeddings, 1000-d hidden layers, 2000/500
    /// balancer and scorer layers, 10-d tag embeddings.
    pub fn paper_preset(src_vocab: usize, tgt_vocab: usize, tag_vocab: usize) -> Self {
        ModelConfig {
            word_dim: 620,
            tag_dim: 10,
            hidden: 1000,
            att_dim: 1000,
            out_hidden: 620,
            balancer_hidden: [2000, 500],
            scorer_hidden: [2000, 500],
            ..Self::new(src_vocab, tgt_vocab, tag_vocab)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("src_vocab", self.src_vocab),
            ("tgt_vocab", self.tgt_vocab),
            ("tag_vocab", self.tag_vocab),
            ("word_dim", self.word_dim),
            ("hidden", self.hidden),
            ("att_dim", self.att_dim),
            ("out_hidden", self.out_hidden),
            ("balancer_hidden1", self.balancer_hidden[0]),
            ("balancer_hidden2", self.balancer_hidden[1]),
            ("scorer_hidden1", self.scorer_hidden[0]),
            ("scorer_hidden2", self.scorer_hidden[1]),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if self.max_phrase_len < 2 {
            return Err(Error::Config("max_phrase_len must be at least 2".into()));
        }
        if let Some(l) = self.constant_lambda {
            if !(l > 0.0 && l < 1.0) {
                return Err(Error::Config(format!("constant lambda {l} outside (0, 1)")));
            }
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return Err(Error::Config("init_scale must be finite and non-negative".into()));
        }
        Ok(())
    }

    /// Width of `[s; E y_prev; c]`.
    pub fn readout_dim(&self) -> usize {
        self.hidden + self.word_dim + 2 * self.hidden
    }

    pub fn to_map(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("src_vocab", self.src_vocab.to_string());
        put("tgt_vocab", self.tgt_vocab.to_string());
        put("tag_vocab", self.tag_vocab.to_string());
        put("word_dim", self.word_dim.to_string());
        put("tag_dim", self.tag_dim.to_string());
        put("hidden", self.hidden.to_string());
        put("att_dim", self.att_dim.to_string());
        put("out_hidden", self.out_hidden.to_string());
        put("balancer_hidden1", self.balancer_hidden[0].to_string());
        put("balancer_hidden2", self.balancer_hidden[1].to_string());
        put("scorer_hidden1", self.scorer_hidden[0].to_string());
        put("scorer_hidden2", self.scorer_hidden[1].to_string());
        put("dropout", format!("{:?}", self.dropout));
        put("max_phrase_len", self.max_phrase_len.to_string());
        put(
            "constant_lambda",
            self.constant_lambda.map_or("none".to_string(), |l| format!("{l:?}")),
        );
        put("init_scale", format!("{:?}", self.init_scale));
        m
    }

    pub fn from_map(m: &BTreeMap<String, String>) -> Result<Self> {
        fn get<T: std::str::FromStr>(m: &BTreeMap<String, String>, k: &str) -> Result<T> {
            let v = m.get(k).ok_or_else(|| Error::Config(format!("model config lacks {k}")))?;
            v.parse().map_err(|_| Error::Config(format!("bad value {v:?} for {k}")))
        }
        let constant_lambda = match m.get("constant_lambda").map(String::as_str) {
            None | Some("none") => None,
            Some(_) => Some(get(m, "constant_lambda")?),
        };
        let cfg = ModelConfig {
            src_vocab: get(m, "src_vocab")?,
            tgt_vocab: get(m, "tgt_vocab")?,
            tag_vocab: get(m, "tag_vocab")?,
            word_dim: get(m, "word_dim")?,
            tag_dim: get(m, "tag_dim")?,
            hidden: get(m, "hidden")?,
            att_dim: get(m, "att_dim")?,
            out_hidden: get(m, "out_hidden")?,
            balancer_hidden: [get(m, "balancer_hidden1")?, get(m, "balancer_hidden2")?],
            scorer_hidden: [get(m, "scorer_hidden1")?, get(m, "scorer_hidden2")?],
            dropout: get(m, "dropout")?,
            max_phrase_len: get(m, "max_phrase_len")?,
            constant_lambda,
            init_scale: get(m, "init_scale")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
