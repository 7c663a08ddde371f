//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails. Pass a substring to run a subset.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use phramem::data::{ChunkSpan, ParallelExample, TaggedSentence, Vocab, BOS, EOS, PAD};
use phramem::decoder::{BeamConfig, Decoder, FragmentKind, Hypothesis};
use phramem::eval::bleu;
use phramem::experiment::{run_idiom_task, IdiomTaskSettings};
use phramem::memory::{write_memory_uncached, Coverage, HypothesisState, PhraseMemory, PreparedSource, SmtModel};
use phramem::nmt::{EncodedSource, Model, ModelConfig, Vocabs};
use phramem::numerics::{check_gradients, GradBuffer, ParamId, ParamStore};
use phramem::smt::{
    extract_phrases, AlignmentMatrix, NGramLM, PhraseTable, PhraseTranslation, SmtFeatureWeights,
};
use phramem::trainer::{
    segment_reference, sentence_loss, sentence_loss_and_grad, train, word_only_loss, LossMode, PreparedExample,
    SegmentedReference, TrainConfig,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GRADCHECK_TOL: f64 = 1e-4;
const GRADCHECK_STEP: f64 = 1e-4;
const GRADCHECK_SECONDS: f64 = 60.0;
const NORMALIZATION_TOL: f64 = 1e-9;
const NORMALIZATION_TRIALS: usize = 1000;
const BEAM_ORACLE_TOL: f64 = 1e-9;
const BEAM_ORACLE_INSTANCES: usize = 100;
const EXTRACTION_TRIALS: usize = 1000;
const LM_SUM_TOL: f64 = 1e-6;
const LM_HAND_TOL: f64 = 1e-9;
const BASELINE_LOSS_TOL: f64 = 1e-12;
const IDIOM_MIN_BLEU_GAIN: f64 = 2.0;
const IDIOM_MIN_PHRASE_PCT: f64 = 30.0;
const IDIOM_MINUTES: f64 = 30.0;
const BLEU_TOL: f64 = 1e-4;
const MEMORY_SIZE: usize = 7;
const MEMORY_INSTANCES: usize = 60;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

fn small_vocabs() -> Vocabs {
    Vocabs {
        src: Vocab::from_ranked(toks("a b c d e")),
        tgt: Vocab::from_ranked(toks("u v w x y z")),
        tag: Vocab::from_ranked(toks("O NP_B NP VP_B VP")),
    }
}

fn small_config(v: &Vocabs, init_scale: f64) -> ModelConfig {
    let mut c = ModelConfig::new(v.src.len(), v.tgt.len(), v.tag.len());
    c.word_dim = 3;
    c.tag_dim = 2;
    c.hidden = 3;
    c.att_dim = 2;
    c.out_hidden = 3;
    c.balancer_hidden = [3, 2];
    c.scorer_hidden = [3, 2];
    c.dropout = 0.0;
    c.init_scale = init_scale;
    c
}

fn translation(target: &str, lts: f64, lst: f64) -> PhraseTranslation {
    PhraseTranslation { target: toks(target), logp_tgt_given_src: lts, logp_src_given_tgt: lst, count: 1 }
}

/// `a b -> u v | u`, `c d -> w x | w x y`.
fn fixed_smt() -> SmtModel {
    let mut t = PhraseTable::new();
    t.insert(toks("a b"), translation("u v", -0.2, -0.2));
    t.insert(toks("a b"), translation("u", -0.5, -0.5));
    t.insert(toks("c d"), translation("w x", -0.4, -0.4));
    t.insert(toks("c d"), translation("w x y", -0.9, -0.9));
    let lm = NGramLM::train(&[toks("u v w x y"), toks("w x u v z")], 3, 0.75).unwrap();
    SmtModel::new(t, lm, SmtFeatureWeights::default())
}

fn example(src: &str, chunks: &[(usize, usize, &str)], tgt: &str) -> ParallelExample {
    let spans = chunks.iter().map(|&(s, e, c)| ChunkSpan::new(s, e, c)).collect();
    ParallelExample { source: TaggedSentence::new(toks(src), spans).unwrap(), target: toks(tgt) }
}

fn first_argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

fn log_softmax(xs: &[f64]) -> Vec<f64> {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z = xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln() + m;
    xs.iter().map(|x| x - z).collect()
}

/// Random tagged sentence over `a..e` whose chunks sit on table patterns.
fn random_source(rng: &mut ChaCha8Rng) -> TaggedSentence {
    let mut tokens = Vec::new();
    let mut chunks = Vec::new();
    let units = rng.gen_range(1..=4);
    for _ in 0..units {
        match rng.gen_range(0..4) {
            0 => {
                chunks.push(ChunkSpan::new(tokens.len(), tokens.len() + 2, "NP"));
                tokens.extend(toks("a b"));
            }
            1 => {
                chunks.push(ChunkSpan::new(tokens.len(), tokens.len() + 2, "VP"));
                tokens.extend(toks("c d"));
            }
            _ => tokens.push(["a", "b", "c", "d", "e"][rng.gen_range(0..5)].to_string()),
        }
    }
    TaggedSentence::new(tokens, chunks).unwrap()
}

// 1 -------------------------------------------------------------------------

fn gradient_fidelity() -> Outcome {
    let start = Instant::now();
    let v = small_vocabs();
    let smt = fixed_smt();
    let model = Model::new(small_config(&v, 0.5), 21).unwrap();
    let batch: Vec<(PreparedExample, SegmentedReference)> = [
        example("e a b c d", &[(1, 3, "NP"), (3, 5, "VP")], "z u v w x"),
        example("c d a b", &[(0, 2, "VP"), (2, 4, "NP")], "w x y u"),
    ]
    .iter()
    .map(|ex| {
        let p = PreparedExample::new(ex, &v, &smt, 7);
        let seg = segment_reference(&model, &smt, &p).unwrap();
        (p, seg)
    })
    .collect();
    let phrases: usize = batch.iter().map(|(_, s)| s.num_phrases()).sum();
    ensure!(phrases >= 2, "batch exercises only {phrases} phrase fragments");

    let loss = |p: &ParamStore| -> (f64, GradBuffer) {
        let mut m = model.clone();
        m.params = p.clone();
        let mut total = 0.0;
        let mut grads = GradBuffer::zeros_like(&m.params);
        for (ex, seg) in &batch {
            let (l, g) = sentence_loss_and_grad(&m, ex, seg).unwrap();
            total += l;
            grads.add(&g);
        }
        (total, grads)
    };
    let (_, g) = loss(&model.params);
    for prefix in ["emb.tag", "att.", "bal.", "score.", "phrase.gru", "enc.", "dec.gru"] {
        let touched = (0..model.params.len())
            .map(ParamId)
            .filter(|&id| model.params.get(id).name.starts_with(prefix))
            .any(|id| g.get(id).iter().any(|&x| x != 0.0));
        ensure!(touched, "no gradient reaches {prefix}*");
    }
    let mut store = model.params.clone();
    let report = check_gradients(&mut store, loss, GRADCHECK_STEP);
    let secs = start.elapsed().as_secs_f64();
    ensure!(
        report.max_rel_error < GRADCHECK_TOL,
        "max relative error {:.3e} at {:?} (analytic {}, numeric {})",
        report.max_rel_error,
        report.worst,
        report.analytic,
        report.numeric
    );
    ensure!(secs < GRADCHECK_SECONDS, "took {secs:.1} s");
    Ok(format!(
        "{} components, max rel err {:.2e} < {GRADCHECK_TOL:e}, {secs:.1} s",
        report.checked, report.max_rel_error
    ))
}

// 2 -------------------------------------------------------------------------

fn normalization() -> Outcome {
    let v = small_vocabs();
    let smt = fixed_smt();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    let mut trial = 0u64;
    while checked < NORMALIZATION_TRIALS {
        trial += 1;
        let scale = rng.gen_range(0.05..2.0);
        let model = Model::new(small_config(&v, scale), trial).unwrap();
        let dec = Decoder::new(&model, &smt, &v.tgt, BeamConfig::default()).unwrap();
        let src = PreparedSource::new(random_source(&mut rng), &v, &smt, 7);
        let ctx = dec.prepare(&src).unwrap();
        let mut hyp = dec.initial(&ctx);
        for _ in 0..rng.gen_range(1..=4) {
            let exp = dec.expand(&ctx, &hyp);
            if exp.memory.is_empty() {
                break;
            }
            let lambda = model.balancer(&exp.step);
            let p_word: f64 = model.word_distribution(&exp.step).iter().sum();
            let reps: Vec<Vec<f64>> = exp.memory.entries.iter().map(|e| model.encode_phrase(&e.ids).unwrap()).collect();
            let reps: Vec<&[f64]> = reps.iter().map(Vec::as_slice).collect();
            let p_phrase: f64 = model.phrase_distribution(&exp.step, &reps).unwrap().iter().sum();
            let total = (1.0 - lambda) * p_word + lambda * p_phrase;
            let successors: f64 = exp.word_logp.iter().chain(&exp.phrase_logp).map(|l| l.exp()).sum();
            worst = worst.max((total - 1.0).abs()).max((successors - 1.0).abs());
            checked += 1;
            if checked == NORMALIZATION_TRIALS {
                break;
            }
            let k = rng.gen_range(0..exp.memory.len() + 2);
            hyp = if k < exp.memory.len() {
                dec.consume_phrase(&ctx, &hyp, &exp, k)
            } else {
                let words: Vec<usize> = exp.word_candidates().filter(|&w| w != EOS).collect();
                dec.word_successor(&hyp, &exp, *words.choose(&mut rng).unwrap())
            };
        }
    }
    ensure!(worst <= NORMALIZATION_TOL, "mass deviates from 1 by {worst:.3e}");
    Ok(format!("{checked} steps over {trial} random models, max |mass - 1| = {worst:.1e}"))
}

// 3 -------------------------------------------------------------------------

#[derive(Clone)]
struct Node {
    state: Vec<f64>,
    y_prev: usize,
    anchor: Option<usize>,
    coverage: Coverage,
    history: Vec<String>,
    ids: Vec<usize>,
    logprob: f64,
}

struct Oracle<'a> {
    model: &'a Model,
    smt: &'a SmtModel,
    vocab: &'a Vocab,
    sentence: &'a TaggedSentence,
    enc: EncodedSource,
    max_len: usize,
}

impl Oracle<'_> {
    /// Every finished derivation, scored from the model primitives.
    fn enumerate(&self, node: &Node, out: &mut Vec<Node>) {
        let m = self.model;
        let step = m.decoder_step(&node.state, node.y_prev, &self.enc);
        let state = HypothesisState { history: &node.history, coverage: &node.coverage, anchor: node.anchor };
        let memory = write_memory_uncached(self.smt, self.sentence, self.vocab, m.config.max_phrase_len, &state);
        let word_lp = m.word_log_distribution(&step);
        let (keep, lambda) = if memory.is_empty() {
            (0.0, f64::NEG_INFINITY)
        } else {
            let l = m.balancer(&step);
            ((1.0 - l).ln(), l.ln())
        };
        let anchor = Some(first_argmax(&step.attention));
        if node.ids.len() < self.max_len {
            for w in 0..word_lp.len() {
                if w == PAD || w == BOS {
                    continue;
                }
                let mut next = node.clone();
                next.state = step.state.clone();
                next.y_prev = w;
                next.anchor = anchor;
                next.history.push(self.vocab.token(w).to_string());
                next.ids.push(w);
                next.logprob += keep + word_lp[w];
                if w == EOS {
                    out.push(next);
                } else {
                    self.enumerate(&next, out);
                }
            }
        }
        if memory.is_empty() {
            return;
        }
        let reps: Vec<Vec<f64>> = memory.entries.iter().map(|e| m.encode_phrase(&e.ids).unwrap()).collect();
        let reps: Vec<&[f64]> = reps.iter().map(Vec::as_slice).collect();
        let phrase_lp = log_softmax(&m.phrase_scores(&step, &reps));
        for (k, e) in memory.entries.iter().enumerate() {
            if node.ids.len() + e.ids.len() > self.max_len {
                continue;
            }
            let mut s = step.state.clone();
            let mut att = step.attention.clone();
            for &w in &e.ids[..e.ids.len() - 1] {
                let st = m.decoder_step(&s, w, &self.enc);
                s = st.state;
                att = st.attention;
            }
            let mut next = node.clone();
            next.state = s;
            next.y_prev = *e.ids.last().unwrap();
            next.anchor = Some(first_argmax(&att));
            next.coverage = node.coverage.apply_phrase(&e.span).unwrap();
            next.history.extend(e.tokens.iter().cloned());
            next.ids.extend_from_slice(&e.ids);
            next.logprob += lambda + phrase_lp[k];
            self.enumerate(&next, out);
        }
    }
}

fn beam_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut derivations = 0;
    let mut with_phrase = 0;
    for inst in 0..BEAM_ORACLE_INSTANCES {
        let n_tgt = rng.gen_range(2..=3);
        let tgt_words: Vec<String> = ["u", "v", "w"][..n_tgt].iter().map(|s| s.to_string()).collect();
        let vs = Vocabs {
            src: Vocab::from_ranked(toks("a b c d")),
            tgt: Vocab::from_ranked(tgt_words.clone()),
            tag: Vocab::from_ranked(toks("O NP_B NP")),
        };
        let len = rng.gen_range(2..=4);
        let tokens: Vec<String> = (0..len).map(|_| ["a", "b", "c", "d"][rng.gen_range(0..4)].to_string()).collect();
        let mut chunks = Vec::new();
        let mut i = 0;
        while i < len && chunks.len() < 2 {
            let w = rng.gen_range(1..=2).min(len - i);
            if rng.gen_bool(0.6) {
                chunks.push(ChunkSpan::new(i, i + w, "NP"));
            }
            i += w;
        }
        let mut table = PhraseTable::new();
        for c in &chunks {
            for _ in 0..rng.gen_range(1..=2) {
                let tgt: Vec<String> = (0..2).map(|_| tgt_words.choose(&mut rng).unwrap().clone()).collect();
                table.insert(
                    tokens[c.start..c.end].to_vec(),
                    translation(&tgt.join(" "), -rng.gen_range(0.0..2.0), -rng.gen_range(0.0..2.0)),
                );
            }
        }
        let lm = NGramLM::train(&[tgt_words.clone()], 2, 0.75).unwrap();
        let mut smt = SmtModel::new(table, lm, SmtFeatureWeights::default());
        smt.memory_size = 2;
        let mut cfg = ModelConfig::new(vs.src.len(), vs.tgt.len(), vs.tag.len());
        cfg.word_dim = 3;
        cfg.tag_dim = 2;
        cfg.hidden = 3;
        cfg.att_dim = 2;
        cfg.out_hidden = 3;
        cfg.balancer_hidden = [3, 2];
        cfg.scorer_hidden = [3, 2];
        cfg.init_scale = rng.gen_range(0.3..1.5);
        let model = Model::new(cfg, 1000 + inst as u64).unwrap();
        let sentence = TaggedSentence::new(tokens, chunks).unwrap();
        let src = PreparedSource::new(sentence.clone(), &vs, &smt, 7);
        let max_len = 4;
        let dec = Decoder::new(&model, &smt, &vs.tgt, BeamConfig { width: 1_000_000, max_len, n_best: 1 }).unwrap();
        let got = dec.search(&src).unwrap();

        let enc = model.encode(&src.input).unwrap();
        let root = Node {
            state: enc.initial_state.clone(),
            y_prev: BOS,
            anchor: None,
            coverage: Coverage::new(sentence.len()),
            history: Vec::new(),
            ids: Vec::new(),
            logprob: 0.0,
        };
        let oracle = Oracle { model: &model, smt: &smt, vocab: &vs.tgt, sentence: &sentence, enc, max_len };
        let mut all = Vec::new();
        oracle.enumerate(&root, &mut all);
        all.sort_by(|a, b| {
            let na = a.logprob / a.ids.len() as f64;
            let nb = b.logprob / b.ids.len() as f64;
            nb.total_cmp(&na).then_with(|| a.ids.cmp(&b.ids))
        });
        derivations += all.len();
        let best = &all[0];
        ensure!(!got.truncated, "instance {inst}: search found no finished hypothesis");
        ensure!(got.best.ids == best.ids, "instance {inst}: search {:?} vs oracle {:?}", got.best.ids, best.ids);
        ensure!(
            (got.best.logprob - best.logprob).abs() <= BEAM_ORACLE_TOL,
            "instance {inst}: score {} vs oracle {}",
            got.best.logprob,
            best.logprob
        );
        with_phrase += usize::from(got.best.num_phrases() > 0);
    }
    ensure!(with_phrase > 0, "no instance selected a phrase derivation");
    Ok(format!(
        "{BEAM_ORACLE_INSTANCES} instances, {derivations} enumerated derivations, {with_phrase} optima use a phrase"
    ))
}

// 4 -------------------------------------------------------------------------

fn consistent_pairs(n: usize, m: usize, links: &BTreeSet<(usize, usize)>, max_len: usize) -> BTreeSet<[usize; 4]> {
    let mut out = BTreeSet::new();
    for ss in 0..n {
        for se in ss + 1..=n {
            for ts in 0..m {
                for te in ts + 1..=m {
                    if se - ss > max_len || te - ts > max_len {
                        continue;
                    }
                    let mut inside = false;
                    let mut crossing = false;
                    for &(i, j) in links {
                        let a = ss <= i && i < se;
                        let b = ts <= j && j < te;
                        inside |= a && b;
                        crossing |= a != b;
                    }
                    if inside && !crossing {
                        out.insert([ss, se, ts, te]);
                    }
                }
            }
        }
    }
    out
}

fn extraction_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut pairs = 0;
    for trial in 0..EXTRACTION_TRIALS {
        let n = rng.gen_range(1..=6);
        let m = rng.gen_range(1..=6);
        let density = rng.gen_range(0.0..0.6);
        let links: BTreeSet<(usize, usize)> =
            (0..n).flat_map(|i| (0..m).map(move |j| (i, j))).filter(|_| rng.gen_bool(density)).collect();
        let max_len = rng.gen_range(1..=7);
        let a = AlignmentMatrix::new(n, m, links.iter().copied()).unwrap();
        let got = extract_phrases(&a, max_len);
        let got_set: BTreeSet<[usize; 4]> =
            got.iter().map(|p| [p.src_start, p.src_end, p.tgt_start, p.tgt_end]).collect();
        ensure!(got_set.len() == got.len(), "trial {trial}: duplicate phrase pairs");
        let want = consistent_pairs(n, m, &links, max_len);
        ensure!(got_set == want, "trial {trial}: {n}x{m} {links:?} max {max_len}: got {got_set:?}, want {want:?}");
        pairs += want.len();
    }
    Ok(format!("{EXTRACTION_TRIALS} random alignments, {pairs} phrase pairs, exact set equality"))
}

// 5 -------------------------------------------------------------------------

fn lm_validity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let words = ["a", "b", "c", "d", "e"];
    let mut worst: f64 = 0.0;
    let mut dists = 0;
    for _ in 0..200 {
        let corpus: Vec<Vec<String>> = (0..rng.gen_range(1..10))
            .map(|_| (0..rng.gen_range(1..8)).map(|_| words[rng.gen_range(0..5)].to_string()).collect())
            .collect();
        let order = rng.gen_range(1..=5);
        let lm = NGramLM::train(&corpus, order, rng.gen_range(0.05..=1.0)).unwrap();
        let vocab: Vec<String> = lm.vocabulary().map(str::to_string).collect();
        for _ in 0..10 {
            let mut history: Vec<String> =
                (0..rng.gen_range(0..6)).map(|_| ["a", "b", "c", "d", "e", "f", "<unk>"][rng.gen_range(0..7)].to_string()).collect();
            if rng.gen_bool(0.3) {
                if let Some(s) = corpus.choose(&mut rng) {
                    history = s.clone();
                }
            }
            let total: f64 = vocab.iter().map(|w| lm.prob(&history, w)).sum();
            worst = worst.max((total - 1.0).abs());
            dists += 1;
        }
    }
    ensure!(worst <= LM_SUM_TOL, "a conditional distribution deviates from 1 by {worst:.3e}");

    // Corpus "a b a b c", bigram, discount 0.75. Predictable words are
    // a, b, c, </s>, <unk> (5 types). Unigram stream a b a b c </s>:
    // counts a:2 b:2 c:1 </s>:1, total 6, 4 seen types.
    //   p1(b) = (2 - 0.75)/6 + 0.75 * 4/6 * 1/5
    // Bigram context "a" continues with {b:2}:
    //   p(b|a) = (2 - 0.75)/2 + 0.75 * 1/2 * p1(b)
    // Context "b" continues with {a:1, c:1}:
    //   p(c|b) = (1 - 0.75)/2 + 0.75 * 2/2 * p1(c),  p1(c) = 0.25/6 + 0.1
    // Context "c" continues with {</s>:1}:
    //   p(</s>|c) = (1 - 0.75)/1 + 0.75 * 1/1 * p1(</s>),  p1(</s>) = p1(c)
    let lm = NGramLM::train(&[toks("a b a b c")], 2, 0.75).unwrap();
    let p1b = 1.25 / 6.0 + 0.75 * 4.0 / 6.0 / 5.0;
    let p1c = 0.25 / 6.0 + 0.1;
    let checks = [
        (lm.prob(&["a"], "b"), 0.625 + 0.375 * p1b),
        (lm.prob(&["b"], "c"), 0.125 + 0.75 * p1c),
        (lm.prob(&["b"], "<unk>"), 0.75 * 0.1),
        (lm.prob(&["c"], "</s>"), 0.25 + 0.75 * p1c),
    ];
    for (got, want) in checks {
        ensure!((got - want).abs() <= LM_HAND_TOL, "hand bigram value {got} vs {want}");
    }
    Ok(format!("{dists} conditionals sum to 1 (max dev {worst:.1e}); bigram hand values match"))
}

// 6 -------------------------------------------------------------------------

/// Teacher-forced word-level NLL of the reference plus EOS.
fn nmt_nll(model: &Model, ex: &PreparedExample) -> f64 {
    let enc = model.encode(&ex.source.input).unwrap();
    let mut s = enc.initial_state.clone();
    let mut y = BOS;
    let mut nll = 0.0;
    for &w in ex.target_ids.iter().chain(std::iter::once(&EOS)) {
        let st = model.decoder_step(&s, y, &enc);
        nll -= model.word_log_distribution(&st)[w];
        s = st.state;
        y = w;
    }
    nll
}

#[derive(Clone)]
struct Plain {
    state: Vec<f64>,
    ids: Vec<usize>,
    logprob: f64,
}

/// Word-only beam search: beams by length, finished entries keep their
/// slots, final choice by per-word log-probability.
fn nmt_beam(model: &Model, src: &PreparedSource, width: usize, max_len: usize) -> Plain {
    let enc = model.encode(&src.input).unwrap();
    let by_score = |a: &Plain, b: &Plain| b.logprob.total_cmp(&a.logprob).then_with(|| a.ids.cmp(&b.ids));
    let mut beam = vec![Plain { state: enc.initial_state.clone(), ids: Vec::new(), logprob: 0.0 }];
    let mut finished = Vec::new();
    let mut alive = Vec::new();
    for n in 0..=max_len {
        beam.sort_by(by_score);
        beam.truncate(width);
        let (done, open): (Vec<Plain>, Vec<Plain>) = beam.drain(..).partition(|h| h.ids.last() == Some(&EOS));
        finished.extend(done);
        if open.is_empty() {
            break;
        }
        alive = open.clone();
        if n == max_len {
            break;
        }
        for h in &open {
            let y = *h.ids.last().unwrap_or(&BOS);
            let st = model.decoder_step(&h.state, y, &enc);
            let lp = model.word_log_distribution(&st);
            for w in 0..lp.len() {
                if w == PAD || w == BOS {
                    continue;
                }
                let mut ids = h.ids.clone();
                ids.push(w);
                beam.push(Plain { state: st.state.clone(), ids, logprob: h.logprob + lp[w] });
            }
        }
    }
    let mut pool = if finished.is_empty() { alive } else { finished };
    pool.sort_by(|a, b| {
        let na = a.logprob / a.ids.len().max(1) as f64;
        let nb = b.logprob / b.ids.len().max(1) as f64;
        nb.total_cmp(&na).then_with(|| a.ids.cmp(&b.ids))
    });
    pool.swap_remove(0)
}

fn param_bits(p: &ParamStore) -> Vec<u64> {
    (0..p.len()).flat_map(|i| p.value(ParamId(i)).iter().map(|x| x.to_bits())).collect()
}

fn baseline_reduction() -> Outcome {
    let v = small_vocabs();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let lm = NGramLM::train(&[toks("u v w"), toks("x y z")], 3, 0.75).unwrap();
    let empties = [SmtModel::baseline(), SmtModel::new(PhraseTable::new(), lm, SmtFeatureWeights::default())];
    let tgt_words = ["u", "v", "w", "x", "y", "z"];
    let data: Vec<ParallelExample> = (0..24)
        .map(|_| {
            let source = random_source(&mut rng);
            let target = (0..rng.gen_range(1..6)).map(|_| tgt_words[rng.gen_range(0..6)].to_string()).collect();
            ParallelExample { source, target }
        })
        .collect();

    let mut worst: f64 = 0.0;
    for (k, smt) in empties.iter().enumerate() {
        let model = Model::new(small_config(&v, 0.4), 60 + k as u64).unwrap();
        for ex in &data {
            let p = PreparedExample::new(ex, &v, smt, 7);
            let seg = segment_reference(&model, smt, &p).unwrap();
            ensure!(seg.num_phrases() == 0, "empty table produced a phrase fragment");
            let hybrid = sentence_loss(&model, &p, &seg).unwrap();
            let plain = nmt_nll(&model, &p);
            worst = worst.max((hybrid - plain).abs()).max((word_only_loss(&model, &p).unwrap() - plain).abs());
        }
    }
    ensure!(worst <= BASELINE_LOSS_TOL, "losses differ by {worst:.3e}");

    let smt = &empties[1];
    let mut cfg = small_config(&v, 0.3);
    cfg.dropout = 0.5;
    let train_set: Vec<PreparedExample> = data[..20].iter().map(|e| PreparedExample::new(e, &v, smt, 7)).collect();
    let dev_set: Vec<PreparedExample> = data[20..].iter().map(|e| PreparedExample::new(e, &v, smt, 7)).collect();
    let run = |mode: LossMode| {
        let mut model = Model::new(cfg.clone(), 66).unwrap();
        let tc = TrainConfig { batch_size: 4, epochs: 3, seed: 9, mode, ..TrainConfig::default() };
        let out = train(&mut model, smt, &train_set, &dev_set, &tc, |_, _| Ok(())).unwrap();
        (out.reports, model)
    };
    let (hybrid_reports, hybrid_model) = run(LossMode::Hybrid);
    let (plain_reports, plain_model) = run(LossMode::WordOnly);
    for (a, b) in hybrid_reports.iter().zip(&plain_reports) {
        ensure!(
            a.train_loss.to_bits() == b.train_loss.to_bits() && a.dev_loss.map(f64::to_bits) == b.dev_loss.map(f64::to_bits),
            "epoch {}: hybrid loss {} vs word-only {}",
            a.epoch,
            a.train_loss,
            b.train_loss
        );
    }
    ensure!(param_bits(&hybrid_model.params) == param_bits(&plain_model.params), "trained parameters differ");

    let beam = BeamConfig { width: 3, max_len: 8, n_best: 1 };
    let dec = Decoder::new(&hybrid_model, smt, &v.tgt, beam).unwrap();
    for (i, ex) in data.iter().enumerate() {
        let src = PreparedSource::new(ex.source.clone(), &v, smt, 7);
        let got = dec.search(&src).unwrap().best;
        let want = nmt_beam(&hybrid_model, &src, beam.width, beam.max_len);
        ensure!(got.ids == want.ids, "sentence {i}: decoder {:?} vs word-only beam {:?}", got.ids, want.ids);
        ensure!(got.logprob.to_bits() == want.logprob.to_bits(), "sentence {i}: scores {} vs {}", got.logprob, want.logprob);
        ensure!(got.num_phrases() == 0, "sentence {i}: phrase emitted from an empty table");
    }
    Ok(format!(
        "loss max diff {worst:.1e}; {} epochs bit-identical; {} decodes identical",
        hybrid_reports.len(),
        data.len()
    ))
}

// 7 -------------------------------------------------------------------------

fn idiom_task() -> Outcome {
    let start = Instant::now();
    let s = IdiomTaskSettings::default();
    let r = run_idiom_task(&s).map_err(|e| e.to_string())?;
    let minutes = start.elapsed().as_secs_f64() / 60.0;
    let (h, b, c) = (&r.hybrid, &r.baseline, &r.constant);
    let detail = format!(
        "hybrid {:.2} / baseline {:.2} / constant {:.2} BLEU; phrases in {:.1}% of outputs; NULL-ablated {:.2}; {:.1} min",
        h.bleu, b.bleu, c.bleu, h.phrase_sentence_pct, h.null_ablated_bleu, minutes
    );
    ensure!(h.bleu - b.bleu >= IDIOM_MIN_BLEU_GAIN, "(a) gain {:.2} < {IDIOM_MIN_BLEU_GAIN}: {detail}", h.bleu - b.bleu);
    ensure!(h.phrase_sentence_pct >= IDIOM_MIN_PHRASE_PCT, "(b) phrase usage too low: {detail}");
    ensure!(h.null_ablated_bleu < h.bleu, "(c) NULL ablation did not lower BLEU: {detail}");
    ensure!(c.bleu < h.bleu, "(d) constant lambda not worse: {detail}");
    ensure!(minutes < IDIOM_MINUTES, "over the time budget: {detail}");
    Ok(detail)
}

// 8 -------------------------------------------------------------------------

fn bleu_correctness() -> Outcome {
    let hyps = [toks("the cat sat on the mat"), toks("a b c d e f g")];
    let refs: Vec<Vec<Vec<String>>> = hyps.iter().map(|h| vec![h.clone()]).collect();
    let perfect = bleu(&hyps, &refs, 4, true).unwrap();
    ensure!(perfect.bleu == 1.0, "perfect match scores {}", perfect.bleu);

    let clipped = bleu(&[toks("the the the the")], &[vec![toks("the cat")]], 4, true).unwrap();
    ensure!((clipped.precisions[0] - 0.25).abs() <= BLEU_TOL, "clipped unigram precision {}", clipped.precisions[0]);

    // Two sentences, the first with two references.
    // hyp1 "the cat sat on the mat": 6/6 unigrams, 5/5 bigrams, 3/4
    // trigrams (cat sat on, sat on the, on the mat), 2/3 four-grams.
    // hyp2 "hello world" vs "hello there world": 2/2 unigrams, 0/1 bigrams.
    // p = 8/8, 5/6, 3/4, 2/3; c = 8, r = 6 + 3 = 9, BP = exp(1 - 9/8).
    let hyps = [toks("the cat sat on the mat"), toks("hello world")];
    let refs = [vec![toks("the cat is on the mat"), toks("a cat sat on the mat")], vec![toks("hello there world")]];
    let got = bleu(&hyps, &refs, 4, true).unwrap().bleu;
    let want = (1.0f64 - 9.0 / 8.0).exp() * ((5.0 / 6.0) * 0.75 * (2.0 / 3.0f64)).powf(0.25);
    ensure!((got - want).abs() <= BLEU_TOL, "two-sentence example {got} vs {want}");
    Ok(format!("perfect = 1.0, clipped p1 = 0.25, hand example {got:.4} vs {want:.4}"))
}

// 9 -------------------------------------------------------------------------

/// The memory a hypothesis state should see, rebuilt from the table.
fn expected_memory(smt: &SmtModel, sentence: &TaggedSentence, max_len: usize, st: &HypothesisState) -> Vec<(Vec<String>, ChunkSpan, f64)> {
    let a = st.anchor.map_or(-1.0, |a| a as f64);
    let mut all = Vec::new();
    for span in &sentence.chunks {
        if (span.start..span.end).any(|i| st.coverage.is_covered(i)) {
            continue;
        }
        let mut list: Vec<PhraseTranslation> = smt.table.lookup(&sentence.tokens[span.start..span.end]).to_vec();
        list.sort_by(|x, y| {
            (y.logp_tgt_given_src + y.logp_src_given_tgt)
                .total_cmp(&(x.logp_tgt_given_src + x.logp_src_given_tgt))
                .then_with(|| x.target.cmp(&y.target))
        });
        list.truncate(smt.candidates_per_chunk);
        for t in list.into_iter().filter(|t| t.target.len() >= 2 && t.target.len() <= max_len) {
            let f = [
                t.logp_tgt_given_src,
                t.logp_src_given_tgt,
                smt.lm.continuation_logprob(st.history, &t.target),
                t.target.len() as f64,
                -(span.start as f64 - a - 1.0).abs(),
                1.0,
            ];
            let score: f64 = smt.weights.0.iter().zip(&f).map(|(w, h)| w * h).sum();
            all.push((t.target, span.clone(), score));
        }
    }
    all.sort_by(|x, y| {
        y.2.total_cmp(&x.2).then_with(|| x.0.cmp(&y.0)).then_with(|| (x.1.start, x.1.end).cmp(&(y.1.start, y.1.end)))
    });
    all.dedup_by(|x, y| x.0 == y.0 && x.1 == y.1);
    all
}

fn same_memory(mem: &PhraseMemory, want: &[(Vec<String>, ChunkSpan, f64)]) -> bool {
    mem.len() == want.len()
        && mem.entries.iter().zip(want).all(|(e, w)| e.tokens == w.0 && e.span == w.1 && (e.score - w.2).abs() < 1e-12)
}

fn memory_protocol() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let v = small_vocabs();
    let tgt_words = ["u", "v", "w", "x", "y", "z"];
    let mut steps = 0;
    let mut truncating = 0;
    let mut adopted = 0;
    for inst in 0..MEMORY_INSTANCES {
        let mut table = PhraseTable::new();
        for src in ["a b", "c d", "e", "b c"] {
            for _ in 0..rng.gen_range(2..=7) {
                let t: Vec<&str> = (0..rng.gen_range(1..=3)).map(|_| tgt_words[rng.gen_range(0..6)]).collect();
                table.insert(toks(src), translation(&t.join(" "), -rng.gen_range(0.0..3.0), -rng.gen_range(0.0..3.0)));
            }
        }
        let lm = NGramLM::train(&[toks("u v w x y z"), toks("z y x w v u")], 3, 0.75).unwrap();
        let smt = SmtModel::new(table, lm, SmtFeatureWeights::default());
        let mut tokens = Vec::new();
        let mut chunks = Vec::new();
        for _ in 0..rng.gen_range(3..=6) {
            let unit = ["a b", "c d", "e", "b c", "a", "d"][rng.gen_range(0..6)];
            let n = toks(unit).len();
            if unit != "a" && unit != "d" {
                chunks.push(ChunkSpan::new(tokens.len(), tokens.len() + n, "NP"));
            }
            tokens.extend(toks(unit));
        }
        let sentence = TaggedSentence::new(tokens, chunks).unwrap();
        let src = PreparedSource::new(sentence.clone(), &v, &smt, 7);
        let model = Model::new(small_config(&v, 1.0), 900 + inst as u64).unwrap();
        let dec = Decoder::new(&model, &smt, &v.tgt, BeamConfig { width: 4, max_len: 12, n_best: 4 }).unwrap();
        let ctx = dec.prepare(&src).unwrap();
        let result = dec.search_prepared(&ctx);
        ensure!(smt.memory_size == MEMORY_SIZE, "default memory size is {}", smt.memory_size);

        for hyp in &result.n_best {
            let mut cur: Hypothesis = dec.initial(&ctx);
            let mut used: Vec<ChunkSpan> = Vec::new();
            for frag in &hyp.fragments {
                let exp = dec.expand(&ctx, &cur);
                let state = HypothesisState { history: &cur.tokens, coverage: &cur.coverage, anchor: cur.anchor };
                let full = expected_memory(&smt, &sentence, 7, &state);
                let top = &full[..full.len().min(MEMORY_SIZE)];
                ensure!(same_memory(&exp.memory, top), "instance {inst}: memory differs from a fresh top-7 rewrite");
                ensure!(dec.write_memory(&ctx, &cur) == exp.memory, "instance {inst}: rewriting the memory changed it");
                let uncached = write_memory_uncached(&smt, &sentence, &v.tgt, 7, &state);
                ensure!(uncached == exp.memory, "instance {inst}: cached and uncached memories differ");
                ensure!(exp.memory.entries.iter().all(|e| e.tokens.len() >= 2), "instance {inst}: single-word entry");
                ensure!(
                    exp.memory.entries.iter().all(|e| !(e.span.start..e.span.end).any(|i| cur.coverage.is_covered(i))),
                    "instance {inst}: entry overlaps covered source words"
                );
                truncating += usize::from(full.len() > MEMORY_SIZE);
                steps += 1;
                cur = match frag.kind {
                    FragmentKind::Word => {
                        let w = v.tgt.id(&frag.tokens[0]);
                        dec.word_successor(&cur, &exp, w)
                    }
                    FragmentKind::Phrase => {
                        let span = frag.span.clone().unwrap();
                        ensure!(
                            used.iter().all(|u| u.end <= span.start || span.end <= u.start),
                            "instance {inst}: overlapping phrase spans"
                        );
                        used.push(span.clone());
                        adopted += 1;
                        let k = exp
                            .memory
                            .entries
                            .iter()
                            .position(|e| e.tokens == frag.tokens && e.span == span)
                            .ok_or_else(|| format!("instance {inst}: adopted phrase not in that step's memory"))?;
                        dec.consume_phrase(&ctx, &cur, &exp, k)
                    }
                };
                ensure!((cur.logprob - hyp.fragments[..cur.fragments.len()].iter().map(|f| f.score).sum::<f64>()).abs() < 1e-9, "instance {inst}: replay score drift");
            }
            ensure!(cur.ids == hyp.ids, "instance {inst}: replay does not reproduce the hypothesis");
            let covered: usize = used.iter().map(|s| s.end - s.start).sum();
            ensure!(cur.coverage.count() == covered, "instance {inst}: coverage does not match adopted spans");
        }
    }
    ensure!(truncating > 0, "no step had more than {MEMORY_SIZE} candidates");
    ensure!(adopted > 0, "no decode adopted a phrase");
    Ok(format!("{steps} decode steps ({truncating} truncated to {MEMORY_SIZE}), {adopted} adopted phrases"))
}

// ---------------------------------------------------------------------------

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("1 gradient fidelity", gradient_fidelity),
        ("2 normalization", normalization),
        ("3 beam-search oracle", beam_oracle),
        ("4 phrase-extraction oracle", extraction_oracle),
        ("5 LM validity", lm_validity),
        ("6 baseline reduction", baseline_reduction),
        ("7 toy idiom task", idiom_task),
        ("8 BLEU correctness", bleu_correctness),
        ("9 memory protocol", memory_protocol),
    ];
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, f) in criteria {
        if !filters.is_empty() && !filters.iter().any(|q| name.contains(q.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  criterion {name}: {detail} [{secs:.1}s]"),
            Err(why) => {
                failed += 1;
                println!("FAIL  criterion {name}: {why} [{secs:.1}s]");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
