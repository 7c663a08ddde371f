use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Parses `key = value` lines. `#` starts a comment; duplicate keys are errors.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", i + 1)));
        }
        if map.insert(k.to_string(), v.trim().to_string()).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key {k}", i + 1)));
        }
    }
    Ok(map)
}

pub fn format_kv(map: &BTreeMap<String, String>) -> String {
    map.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

/// Every run-config key with its default and a one-line description.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("work_dir", "work", "directory for derived artifacts"),
    ("train_src", "", "training source sentences"),
    ("train_tgt", "", "training target sentences"),
    ("train_chunks", "", "training chunk annotations (optional)"),
    ("dev_src", "", "development source sentences (optional)"),
    ("dev_tgt", "", "development target sentences"),
    ("dev_chunks", "", "development chunk annotations (optional)"),
    ("test_src", "", "test source sentences"),
    ("test_chunks", "", "test chunk annotations (optional)"),
    ("test_refs", "", "comma-separated reference files"),
    ("chunk_lexicon", "", "`CATEGORY ||| tokens` patterns chunking files that lack annotations (optional)"),
    ("baseline_output", "", "baseline translations for the `new` analysis columns (optional)"),
    ("static_dictionary", "", "extra `src ||| tgt` entries with probability 1 (optional)"),
    ("max_sentence_len", "50", "longer training pairs are dropped"),
    ("src_vocab_size", "0", "source shortlist size, 0 = all"),
    ("tgt_vocab_size", "0", "target shortlist size, 0 = all"),
    ("preset", "desk", "dimension preset: desk or paper"),
    ("word_dim", "", "word embedding size (preset if empty)"),
    ("tag_dim", "", "tag embedding size, 0 disables tags"),
    ("hidden", "", "encoder/decoder GRU size"),
    ("att_dim", "", "attention hidden size"),
    ("out_hidden", "", "output layer hidden size"),
    ("balancer_hidden1", "", "balancer first hidden layer"),
    ("balancer_hidden2", "", "balancer second hidden layer"),
    ("scorer_hidden1", "", "phrase scorer first hidden layer"),
    ("scorer_hidden2", "", "phrase scorer second hidden layer"),
    ("dropout", "0.5", "output-layer dropout rate"),
    ("init_scale", "0.08", "uniform initialisation range"),
    ("max_phrase_len", "7", "maximum phrase length"),
    ("align_iterations", "5", "IBM Model 1 EM iterations"),
    ("lm_order", "4", "n-gram order"),
    ("lm_discount", "0.75", "absolute discount"),
    ("w_tgt_given_src", "1.0", "weight of log p(tgt|src)"),
    ("w_src_given_tgt", "1.0", "weight of log p(src|tgt)"),
    ("w_lm", "1.0", "weight of the LM continuation log-probability"),
    ("w_word_penalty", "-0.3", "weight of the target length"),
    ("w_distortion", "0.3", "weight of the distortion feature"),
    ("w_phrase_penalty", "0.0", "weight of the constant phrase feature"),
    ("memory_size", "7", "phrases kept in memory per step"),
    ("candidates_per_chunk", "5", "table translations considered per chunk"),
    ("batch_size", "16", "minibatch size"),
    ("epochs", "10", "training epochs"),
    ("rho", "0.95", "Adadelta decay"),
    ("eps", "1e-6", "Adadelta epsilon"),
    ("clip_norm", "1.0", "global gradient norm limit"),
    ("beam_width", "10", "beam size"),
    ("max_output_len", "80", "maximum output length"),
    ("case_insensitive", "true", "lowercase before BLEU"),
    ("constant_lambda", "none", "fix the balancer output to this value"),
    ("baseline_mode", "false", "use an empty phrase table"),
    ("seed", "1", "seed for every random choice"),
    ("threads", "1", "worker threads"),
    ("toy_pairs", "2000", "generated toy pairs"),
    ("toy_vocab", "50", "toy plain-word vocabulary"),
    ("toy_idioms", "100", "toy idiom count"),
];

/// Parsed run configuration; values stay textual until typed accessors
/// convert them.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            values: KEYS.iter().map(|(k, v, _)| (k.to_string(), v.to_string())).collect(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (k, v) in parse_kv(text)? {
            cfg.set(&k, &v)?;
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let p = path.as_ref();
        let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match self.values.get_mut(key) {
            Some(v) => {
                *v = value.to_string();
                Ok(())
            }
            None => Err(Error::Config(format!("unknown key {key}"))),
        }
    }

    pub fn str(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or_else(|| panic!("undeclared key {key}"))
    }

    pub fn get<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.str(key);
        raw.parse()
            .map_err(|_| Error::Config(format!("{key}: cannot parse {raw:?}")))
    }

    /// `None` for an empty value.
    pub fn opt<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        if self.str(key).is_empty() {
            Ok(None)
        } else {
            self.get(key).map(Some)
        }
    }

    pub fn bool(&self, key: &str) -> Result<bool> {
        match self.str(key) {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            other => Err(Error::Config(format!("{key}: expected true or false, got {other:?}"))),
        }
    }

    /// Path-valued key; `None` when empty.
    pub fn path(&self, key: &str) -> Option<std::path::PathBuf> {
        let v = self.str(key);
        (!v.is_empty()).then(|| std::path::PathBuf::from(v))
    }

    /// Path-valued key that must name an existing file.
    pub fn existing_path(&self, key: &str) -> Result<std::path::PathBuf> {
        let p = self.path(key).ok_or_else(|| Error::Config(format!("{key} is not set")))?;
        if !p.is_file() {
            return Err(Error::Config(format!("{key}: {} does not exist", p.display())));
        }
        Ok(p)
    }

    pub fn list(&self, key: &str) -> Vec<String> {
        self.str(key).split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::to_string).collect()
    }

    pub fn values(&self) -> &BTreeMap<String, String> {
        &self.values
    }
}

/// `--help` text listing every key and its default.
pub fn keys_help() -> String {
    let mut s = String::from("config keys (key = value):\n");
    for (k, d, h) in KEYS {
        let d = if d.is_empty() { "<unset>" } else { d };
        s.push_str(&format!("  {k:<22} {d:<10} {h}\n"));
    }
    s
}
