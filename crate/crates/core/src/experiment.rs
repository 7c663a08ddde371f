//! The synthetic idiom task: hybrid vs. word-only vs. constant-lambda models
//! trained and decoded under identical seeds.

use std::time::Instant;

use serde::Serialize;

use crate::data::{default_idiom_table, generate_idiom_corpus, ToyConfig, ToyCorpus};
use crate::decoder::{BeamConfig, Decoder, SearchResult};
use crate::error::Result;
use crate::eval::{bleu, null_ablation, phrase_usage, SentenceTrace};
use crate::memory::SmtModel;
use crate::nmt::{Model, ModelConfig, Vocabs};
use crate::pipeline::{build_smt, build_vocabs, prepare_examples, prepare_sources, translate_all, SmtSettings};
use crate::trainer::{train, LossMode, TrainConfig};

#[derive(Debug, Clone)]
pub struct IdiomTaskSettings {
    pub seed: u64,
    pub pairs: usize,
    pub vocab: usize,
    pub idioms: usize,
    pub zipf_exponent: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub beam: BeamConfig,
    pub word_dim: usize,
    pub tag_dim: usize,
    pub hidden: usize,
    pub threads: usize,
    pub constant_lambda: f64,
}

impl Default for IdiomTaskSettings {
    fn default() -> Self {
        IdiomTaskSettings {
            seed: 17,
            pairs: 2000,
            vocab: 50,
            idioms: 100,
            zipf_exponent: 1.0,
            epochs: 30,
            batch_size: 16,
            beam: BeamConfig { width: 5, max_len: 40, n_best: 1 },
            word_dim: 24,
            tag_dim: 8,
            hidden: 48,
            threads: 1,
            constant_lambda: 0.1,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SystemResult {
    pub name: String,
    pub bleu: f64,
    pub phrase_sentence_pct: f64,
    pub null_ablated_bleu: f64,
    pub final_train_loss: f64,
    pub train_seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct IdiomTaskReport {
    pub hybrid: SystemResult,
    pub baseline: SystemResult,
    pub constant: SystemResult,
    pub phrase_table_pairs: usize,
}

pub fn idiom_corpus(s: &IdiomTaskSettings) -> Result<ToyCorpus> {
    let table = default_idiom_table(s.idioms, s.vocab, s.seed);
    let mut cfg = ToyConfig::new(s.seed, s.pairs, s.vocab, table);
    cfg.zipf_exponent = s.zipf_exponent;
    generate_idiom_corpus(&cfg)
}

fn model_config(s: &IdiomTaskSettings, v: &Vocabs) -> ModelConfig {
    let mut c = ModelConfig::new(v.src.len(), v.tgt.len(), v.tag.len());
    c.word_dim = s.word_dim;
    c.tag_dim = s.tag_dim;
    c.hidden = s.hidden;
    c.att_dim = s.hidden;
    c.out_hidden = s.hidden;
    c.balancer_hidden = [s.hidden, s.hidden / 2];
    c.scorer_hidden = [s.hidden, s.hidden / 2];
    c
}

fn run_system(
    name: &str,
    s: &IdiomTaskSettings,
    corpus: &ToyCorpus,
    vocabs: &Vocabs,
    smt: &SmtModel,
    mode: LossMode,
    constant: Option<f64>,
) -> Result<SystemResult> {
    let mut cfg = model_config(s, vocabs);
    cfg.constant_lambda = constant;
    let mut model = Model::new(cfg, s.seed)?;
    let max_len = model.config.max_phrase_len;
    let train_set = prepare_examples(&corpus.train, vocabs, smt, max_len);
    let dev_set = prepare_examples(&corpus.dev, vocabs, smt, max_len);
    let tc = TrainConfig {
        batch_size: s.batch_size,
        epochs: s.epochs,
        seed: s.seed,
        threads: s.threads,
        mode,
        ..TrainConfig::default()
    };
    let start = Instant::now();
    let outcome = train(&mut model, smt, &train_set, &dev_set, &tc, |_, _| Ok(()))?;
    let train_seconds = start.elapsed().as_secs_f64();

    let decoder = Decoder::new(&model, smt, &vocabs.tgt, s.beam)?;
    let sources = prepare_sources(&corpus.test, vocabs, smt, max_len);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(s.threads).build().expect("thread pool");
    let results: Vec<SearchResult> = pool.install(|| translate_all(&decoder, &sources))?;
    let traces: Vec<SentenceTrace> = results.iter().map(|r| SentenceTrace::from(&r.best)).collect();
    let hyps: Vec<Vec<String>> = traces.iter().map(|t| t.tokens.clone()).collect();
    let refs: Vec<Vec<Vec<String>>> = corpus.test.iter().map(|e| vec![e.target.clone()]).collect();
    let score = bleu(&hyps, &refs, 4, true)?;
    let ablated = bleu(&null_ablation(&traces), &refs, 4, true)?;
    let usage = phrase_usage(&traces, &refs, None)?;
    Ok(SystemResult {
        name: name.to_string(),
        bleu: 100.0 * score.bleu,
        phrase_sentence_pct: usage.sentence_pct(),
        null_ablated_bleu: 100.0 * ablated.bleu,
        final_train_loss: outcome.reports.last().map_or(f64::NAN, |r| r.train_loss),
        train_seconds,
    })
}

/// Trains and evaluates the three systems on one generated corpus.
pub fn run_idiom_task(s: &IdiomTaskSettings) -> Result<IdiomTaskReport> {
    let corpus = idiom_corpus(s)?;
    let vocabs = build_vocabs(&corpus.train, None, None);
    let smt = build_smt(&corpus.train, &SmtSettings::default())?;
    let baseline_smt = SmtModel::baseline();
    Ok(IdiomTaskReport {
        hybrid: run_system("hybrid", s, &corpus, &vocabs, &smt, LossMode::Hybrid, None)?,
        baseline: run_system("baseline", s, &corpus, &vocabs, &baseline_smt, LossMode::WordOnly, None)?,
        constant: run_system("constant", s, &corpus, &vocabs, &smt, LossMode::Hybrid, Some(s.constant_lambda))?,
        phrase_table_pairs: smt.table.num_pairs(),
    })
}
