//! Synthetic idiom language for desk-scale experiments.
//!
//! Plain source words `s<k>` translate one-for-one and monotonically to
//! `t<k>`. Idiom spans (source tokens `x<k>`, possibly several) translate to
//! fixed multi-word target phrases drawn from the plain target words, so an
//! idiom's translation cannot be composed from its parts. Idioms are picked
//! with a Zipf law, leaving a tail of rare idioms that a phrase table covers
//! but a word-level model sees only a handful of times.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ChunkSpan, ParallelExample, TaggedSentence};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdiomEntry {
    pub source: Vec<String>,
    pub target: Vec<String>,
    pub category: String,
}

#[derive(Debug, Clone)]
pub struct ToyConfig {
    pub seed: u64,
    pub n_pairs: usize,
    /// Number of plain word types per side.
    pub vocab_size: usize,
    pub idioms: Vec<IdiomEntry>,
    pub min_len: usize,
    pub max_len: usize,
    /// Probability that a sentence carries at least one idiom.
    pub idiom_rate: f64,
    /// Probability of a second idiom given the first.
    pub second_idiom_rate: f64,
    pub zipf_exponent: f64,
    pub dev_fraction: f64,
    pub test_fraction: f64,
}

impl ToyConfig {
    pub fn new(seed: u64, n_pairs: usize, vocab_size: usize, idioms: Vec<IdiomEntry>) -> Self {
        ToyConfig {
            seed,
            n_pairs,
            vocab_size,
            idioms,
            min_len: 3,
            max_len: 8,
            idiom_rate: 0.8,
            second_idiom_rate: 0.3,
            zipf_exponent: 1.0,
            dev_fraction: 0.05,
            test_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ToyCorpus {
    pub train: Vec<ParallelExample>,
    pub dev: Vec<ParallelExample>,
    pub test: Vec<ParallelExample>,
}

pub fn plain_source(k: usize) -> String {
    format!("s{k}")
}

pub fn plain_target(k: usize) -> String {
    format!("t{k}")
}

/// `n` single-token idioms with 2- or 3-word targets over the first
/// `vocab_size` plain target words.
pub fn default_idiom_table(n: usize, vocab_size: usize, seed: u64) -> Vec<IdiomEntry> {
    let cats = ["NP", "VP", "QP"];
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1d10_3a7b);
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(n);
    let mut k = 0;
    while out.len() < n {
        let len = if k % 2 == 0 { 2 } else { 3 };
        let target: Vec<String> = (0..len).map(|_| plain_target(rng.gen_range(0..vocab_size.max(1)))).collect();
        if !seen.insert(target.clone()) {
            continue;
        }
        out.push(IdiomEntry {
            source: vec![format!("x{k}")],
            target,
            category: cats[k % cats.len()].to_string(),
        });
        k += 1;
    }
    out
}

fn validate(cfg: &ToyConfig) -> Result<()> {
    if cfg.vocab_size == 0 || cfg.n_pairs == 0 {
        return Err(Error::Config("toy corpus needs vocab_size > 0 and n_pairs > 0".into()));
    }
    if cfg.min_len == 0 || cfg.min_len > cfg.max_len {
        return Err(Error::Config("toy corpus needs 0 < min_len <= max_len".into()));
    }
    for rate in [cfg.idiom_rate, cfg.second_idiom_rate, cfg.dev_fraction, cfg.test_fraction] {
        if !(0.0..=1.0).contains(&rate) {
            return Err(Error::Config(format!("rate {rate} outside [0, 1]")));
        }
    }
    if cfg.dev_fraction + cfg.test_fraction >= 1.0 {
        return Err(Error::Config("dev + test fractions leave no training data".into()));
    }
    let known: HashSet<String> = (0..cfg.vocab_size).map(plain_target).collect();
    for idiom in &cfg.idioms {
        if idiom.source.is_empty() || !(2..=4).contains(&idiom.target.len()) {
            return Err(Error::Config(format!(
                "idiom {:?} needs a non-empty source and a 2-4 word target",
                idiom.source
            )));
        }
        if let Some(w) = idiom.target.iter().find(|w| !known.contains(*w)) {
            return Err(Error::Config(format!(
                "idiom target word {w} lies outside the {}-word vocabulary",
                cfg.vocab_size
            )));
        }
        if idiom.source.iter().any(|w| w.starts_with('s') && w[1..].parse::<usize>().is_ok()) {
            return Err(Error::Config(format!("idiom source {:?} collides with plain words", idiom.source)));
        }
    }
    Ok(())
}

fn zipf_weights(n: usize, s: f64) -> Vec<f64> {
    let w: Vec<f64> = (1..=n).map(|r| 1.0 / (r as f64).powf(s)).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

fn sample_index<R: Rng>(rng: &mut R, weights: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

enum Unit {
    Plain(usize),
    Idiom(usize),
}

/// Deterministic train/dev/test corpus; no source sentence appears twice.
pub fn generate_idiom_corpus(cfg: &ToyConfig) -> Result<ToyCorpus> {
    validate(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let weights = zipf_weights(cfg.idioms.len(), cfg.zipf_exponent);
    let mut seen: HashSet<String> = HashSet::new();
    let mut pairs = Vec::with_capacity(cfg.n_pairs);
    let max_attempts = cfg.n_pairs * 50 + 1000;
    let mut attempts = 0;

    while pairs.len() < cfg.n_pairs {
        attempts += 1;
        if attempts > max_attempts {
            return Err(Error::Config(format!(
                "could only draw {} distinct sentences; enlarge the vocabulary or lengths",
                pairs.len()
            )));
        }
        let len = rng.gen_range(cfg.min_len..=cfg.max_len);
        let mut units: Vec<Unit> = (0..len).map(|_| Unit::Plain(rng.gen_range(0..cfg.vocab_size))).collect();
        if !cfg.idioms.is_empty() && rng.gen_bool(cfg.idiom_rate) {
            let n_idioms = if rng.gen_bool(cfg.second_idiom_rate) { 2 } else { 1 };
            for _ in 0..n_idioms {
                let which = sample_index(&mut rng, &weights);
                let pos = rng.gen_range(0..=units.len());
                units.insert(pos, Unit::Idiom(which));
            }
        }

        let mut src = Vec::new();
        let mut tgt = Vec::new();
        let mut chunks = Vec::new();
        for u in &units {
            match *u {
                Unit::Plain(k) => {
                    src.push(plain_source(k));
                    tgt.push(plain_target(k));
                }
                Unit::Idiom(i) => {
                    let idiom = &cfg.idioms[i];
                    let start = src.len();
                    src.extend(idiom.source.iter().cloned());
                    tgt.extend(idiom.target.iter().cloned());
                    chunks.push(ChunkSpan::new(start, src.len(), idiom.category.clone()));
                }
            }
        }
        if !seen.insert(src.join(" ")) {
            continue;
        }
        let source = TaggedSentence::new(src, chunks)?;
        pairs.push(ParallelExample { source, target: tgt });
    }

    pairs.shuffle(&mut rng);
    let n_test = ((cfg.n_pairs as f64) * cfg.test_fraction).round() as usize;
    let n_dev = ((cfg.n_pairs as f64) * cfg.dev_fraction).round() as usize;
    let test = pairs.split_off(pairs.len() - n_test);
    let dev = pairs.split_off(pairs.len() - n_dev);
    Ok(ToyCorpus { train: pairs, dev, test })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(seed: u64, n: usize) -> ToyConfig {
        ToyConfig::new(seed, n, 20, default_idiom_table(6, 20, seed))
    }

    #[test]
    fn deterministic_given_seed() {
        let a = generate_idiom_corpus(&cfg(7, 10)).unwrap();
        let b = generate_idiom_corpus(&cfg(7, 10)).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.test, b.test);
        let c = generate_idiom_corpus(&cfg(8, 10)).unwrap();
        assert_ne!(a.train, c.train);
    }

    #[test]
    fn idioms_align_to_their_full_target_phrase() {
        let mut c = cfg(3, 300);
        c.idioms = vec![IdiomEntry {
            source: vec!["x0".into()],
            target: vec!["t1".into(), "t2".into(), "t3".into()],
            category: "NP".into(),
        }];
        let corpus = generate_idiom_corpus(&c).unwrap();
        let mut seen = 0;
        for ex in corpus.train.iter().chain(&corpus.dev).chain(&corpus.test) {
            // Reconstruct the target from the source and compare.
            let mut rebuilt = Vec::new();
            for tok in &ex.source.tokens {
                if tok == "x0" {
                    seen += 1;
                    rebuilt.extend(["t1", "t2", "t3"].map(String::from));
                } else {
                    rebuilt.push(format!("t{}", &tok[1..]));
                }
            }
            assert_eq!(rebuilt, ex.target);
            for ch in &ex.source.chunks {
                assert_eq!(ex.source.tokens[ch.start], "x0");
                assert_eq!(ch.len(), 1);
            }
        }
        assert!(seen > 100);
    }

    #[test]
    fn splits_are_disjoint() {
        let corpus = generate_idiom_corpus(&cfg(11, 400)).unwrap();
        let train: HashSet<String> = corpus.train.iter().map(|e| e.source.tokens.join(" ")).collect();
        assert_eq!(train.len(), corpus.train.len());
        for e in corpus.test.iter().chain(&corpus.dev) {
            assert!(!train.contains(&e.source.tokens.join(" ")));
        }
        assert_eq!(corpus.train.len() + corpus.dev.len() + corpus.test.len(), 400);
    }

    #[test]
    fn vocab_too_small_is_config_error() {
        let mut c = cfg(1, 10);
        c.vocab_size = 3;
        assert!(matches!(generate_idiom_corpus(&c), Err(Error::Config(_))));
    }
}
