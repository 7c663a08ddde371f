use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use phramem::config::{format_kv, RunConfig};
use phramem::data::{
    default_idiom_table, fallback_chunker, generate_idiom_corpus, load_parallel, parse_chunk_line,
    read_lines, write_parallel, Lexicon, ParallelExample, TaggedSentence, ToyConfig, Vocab,
};
use phramem::decoder::{BeamConfig, Decoder};
use phramem::error::{Error, Result};
use phramem::eval::{bleu, null_ablation, phrase_usage, SentenceTrace};
use phramem::memory::{PreparedSource, SmtModel};
use phramem::nmt::{Model, ModelConfig, Vocabs};
use phramem::numerics::{read_checkpoint, write_checkpoint};
use phramem::pipeline::{align_corpus, assemble_smt, build_vocabs, extract_table, prepare_examples, train_lm, SmtSettings};
use phramem::smt::{format_pharaoh, parse_pharaoh, NGramLM, PhraseTable, SmtFeatureWeights};
use phramem::trainer::{self, LossMode, TrainConfig};

use crate::Flags;

const ALIGNMENTS: &str = "train.align";
const PHRASE_TABLE: &str = "phrase_table.txt";
const LM: &str = "lm.bin";
const MODEL: &str = "model.bin";
const TRAIN_LOG: &str = "train.log";
const OUTPUT: &str = "output.txt";
const TRACE: &str = "trace.jsonl";
const MEMORY_DUMP: &str = "memory.jsonl";
const REPORT: &str = "report.json";
const ANALYSIS: &str = "analysis.json";
const TOY_DIR: &str = "toy";

pub struct Context {
    pub cfg: RunConfig,
    pub flags: Flags,
    work: PathBuf,
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn lines_to_text<I: IntoIterator<Item = String>>(lines: I) -> String {
    lines.into_iter().map(|l| l + "\n").collect()
}

fn split(line: &str) -> Vec<String> {
    line.split_whitespace().map(String::from).collect()
}

fn nonzero(n: usize) -> Option<usize> {
    (n > 0).then_some(n)
}

impl Context {
    pub fn new(cfg: RunConfig, flags: Flags) -> Result<Self> {
        let work = cfg.path("work_dir").ok_or_else(|| Error::Config("work_dir is not set".into()))?;
        fs::create_dir_all(&work).map_err(|e| Error::io(&work, e))?;
        Ok(Context { cfg, flags, work })
    }

    fn artifact(&self, name: &str) -> PathBuf {
        self.work.join(name)
    }

    /// A work-dir artifact that an earlier subcommand must have produced.
    fn require(&self, name: &str, producer: &str) -> Result<PathBuf> {
        let p = self.artifact(name);
        if !p.is_file() {
            return Err(Error::Config(format!("{} is missing; run `phramem {producer}` first", p.display())));
        }
        Ok(p)
    }

    fn seed(&self) -> Result<u64> {
        self.cfg.get("seed")
    }

    fn threads(&self) -> Result<usize> {
        let t: usize = self.cfg.get("threads")?;
        if t == 0 {
            return Err(Error::Config("threads must be positive".into()));
        }
        Ok(t)
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.threads()?)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))
    }

    fn lexicon(&self) -> Result<Option<Lexicon>> {
        if self.cfg.path("chunk_lexicon").is_none() {
            return Ok(None);
        }
        let p = self.cfg.existing_path("chunk_lexicon")?;
        let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        Lexicon::parse(&text).map(Some)
    }

    fn optional_path(&self, key: &str) -> Result<Option<PathBuf>> {
        match self.cfg.path(key) {
            Some(_) => self.cfg.existing_path(key).map(Some),
            None => Ok(None),
        }
    }

    fn load_corpus(&self, src: &str, tgt: &str, chunks: &str) -> Result<Vec<ParallelExample>> {
        let src_p = self.cfg.existing_path(src)?;
        let tgt_p = self.cfg.existing_path(tgt)?;
        let chunk_p = self.optional_path(chunks)?;
        let loaded = load_parallel(&src_p, &tgt_p, chunk_p.as_deref(), self.cfg.get("max_sentence_len")?)?;
        if loaded.dropped > 0 {
            eprintln!("{}: dropped {} empty or over-long pairs", src_p.display(), loaded.dropped);
        }
        let mut examples = loaded.examples;
        if chunk_p.is_none() {
            if let Some(lex) = self.lexicon()? {
                for ex in &mut examples {
                    ex.source = fallback_chunker(&ex.source.tokens, &lex);
                }
            }
        }
        Ok(examples)
    }

    fn train_corpus(&self) -> Result<Vec<ParallelExample>> {
        let ex = self.load_corpus("train_src", "train_tgt", "train_chunks")?;
        if ex.is_empty() {
            return Err(Error::Format("training corpus has no usable pairs".into()));
        }
        Ok(ex)
    }

    fn smt_settings(&self) -> Result<SmtSettings> {
        let c = &self.cfg;
        Ok(SmtSettings {
            align_iterations: c.get("align_iterations")?,
            max_phrase_len: c.get("max_phrase_len")?,
            lm_order: c.get("lm_order")?,
            lm_discount: c.get("lm_discount")?,
            weights: SmtFeatureWeights::new([
                c.get("w_tgt_given_src")?,
                c.get("w_src_given_tgt")?,
                c.get("w_lm")?,
                c.get("w_word_penalty")?,
                c.get("w_distortion")?,
                c.get("w_phrase_penalty")?,
            ])?,
            memory_size: c.get("memory_size")?,
            candidates_per_chunk: c.get("candidates_per_chunk")?,
        })
    }

    fn load_smt(&self, baseline: bool) -> Result<SmtModel> {
        if baseline {
            return Ok(SmtModel::baseline());
        }
        let table = PhraseTable::load(self.require(PHRASE_TABLE, "extract")?)?;
        let lm = NGramLM::from_tensors(&read_checkpoint(self.require(LM, "lm")?)?)?;
        Ok(assemble_smt(table, lm, &self.smt_settings()?))
    }

    fn constant_lambda(&self) -> Result<Option<f64>> {
        match self.cfg.str("constant_lambda") {
            "none" | "" => Ok(None),
            _ => self.cfg.get("constant_lambda").map(Some),
        }
    }

    fn model_config(&self, v: &Vocabs) -> Result<ModelConfig> {
        let c = &self.cfg;
        let (s, t, g) = (v.src.len(), v.tgt.len(), v.tag.len());
        let mut m = match c.str("preset") {
            "desk" => ModelConfig::new(s, t, g),
            "paper" => ModelConfig::paper_preset(s, t, g),
            other => return Err(Error::Config(format!("preset: expected desk or paper, got {other:?}"))),
        };
        let [b1, b2] = &mut m.balancer_hidden;
        let [s1, s2] = &mut m.scorer_hidden;
        let dims: [(&str, &mut usize); 10] = [
            ("word_dim", &mut m.word_dim),
            ("tag_dim", &mut m.tag_dim),
            ("hidden", &mut m.hidden),
            ("att_dim", &mut m.att_dim),
            ("out_hidden", &mut m.out_hidden),
            ("balancer_hidden1", b1),
            ("balancer_hidden2", b2),
            ("scorer_hidden1", s1),
            ("scorer_hidden2", s2),
            ("max_phrase_len", &mut m.max_phrase_len),
        ];
        for (key, slot) in dims {
            if let Some(v) = c.opt(key)? {
                *slot = v;
            }
        }
        m.dropout = c.get("dropout")?;
        m.init_scale = c.get("init_scale")?;
        m.constant_lambda = self.constant_lambda()?;
        m.validate()?;
        Ok(m)
    }

    fn beam_config(&self) -> Result<BeamConfig> {
        let b = BeamConfig { width: self.cfg.get("beam_width")?, max_len: self.cfg.get("max_output_len")?, n_best: 1 };
        if b.width == 0 || b.max_len == 0 {
            return Err(Error::Config("beam_width and max_output_len must be positive".into()));
        }
        Ok(b)
    }

    fn vocab_paths(&self) -> [PathBuf; 3] {
        [self.artifact("vocab.src"), self.artifact("vocab.tgt"), self.artifact("vocab.tag")]
    }

    fn save_vocabs(&self, v: &Vocabs) -> Result<()> {
        let [s, t, g] = self.vocab_paths();
        v.src.save(s)?;
        v.tgt.save(t)?;
        v.tag.save(g)
    }

    fn load_vocabs(&self) -> Result<Vocabs> {
        let [s, t, g] = self.vocab_paths();
        for p in [&s, &t, &g] {
            if !p.is_file() {
                return Err(Error::Config(format!("{} is missing; run `phramem train` first", p.display())));
            }
        }
        Ok(Vocabs { src: Vocab::load(s)?, tgt: Vocab::load(t)?, tag: Vocab::load(g)? })
    }

    /// Line-aligned reference sets, one inner vector per reference file.
    fn references(&self, n: usize) -> Result<Vec<Vec<Vec<String>>>> {
        let files: Vec<PathBuf> = if self.flags.refs.is_empty() {
            let list = self.cfg.list("test_refs");
            if list.is_empty() {
                return Err(Error::Config("no references: set test_refs or pass --refs".into()));
            }
            list.into_iter().map(PathBuf::from).collect()
        } else {
            self.flags.refs.clone()
        };
        let mut refs = vec![Vec::new(); n];
        for f in files {
            if !f.is_file() {
                return Err(Error::Config(format!("reference file {} does not exist", f.display())));
            }
            let lines = read_lines(&f)?;
            if lines.len() != n {
                return Err(Error::Format(format!(
                    "{} has {} lines but there are {n} hypotheses",
                    f.display(),
                    lines.len()
                )));
            }
            for (r, l) in refs.iter_mut().zip(&lines) {
                r.push(split(l));
            }
        }
        Ok(refs)
    }

    fn traces(&self) -> Result<Vec<SentenceTrace>> {
        let p = self.require(TRACE, "translate --trace")?;
        read_lines(&p)?
            .iter()
            .enumerate()
            .map(|(i, l)| SentenceTrace::parse(l).map_err(|e| Error::Format(format!("{} line {}: {e}", p.display(), i + 1))))
            .collect()
    }

    fn outputs(&self) -> Result<Vec<Vec<String>>> {
        Ok(read_lines(self.require(OUTPUT, "translate")?)?.iter().map(|l| split(l)).collect())
    }
}

pub fn align(ctx: &Context) -> Result<()> {
    let train = ctx.train_corpus()?;
    let alignments = align_corpus(&train, ctx.cfg.get("align_iterations")?)?;
    let out = ctx.artifact(ALIGNMENTS);
    write_file(&out, lines_to_text(alignments.iter().map(format_pharaoh)))?;
    eprintln!("aligned {} pairs -> {}", train.len(), out.display());
    Ok(())
}

pub fn extract(ctx: &Context) -> Result<()> {
    let train = ctx.train_corpus()?;
    let align_path = ctx.require(ALIGNMENTS, "align")?;
    let lines = read_lines(&align_path)?;
    if lines.len() != train.len() {
        return Err(Error::Format(format!(
            "{} has {} lines but the training corpus has {} usable pairs",
            align_path.display(),
            lines.len(),
            train.len()
        )));
    }
    let alignments = lines
        .iter()
        .zip(&train)
        .enumerate()
        .map(|(i, (l, ex))| {
            parse_pharaoh(l, ex.source.len(), ex.target.len())
                .map_err(|e| Error::Format(format!("{} line {}: {e}", align_path.display(), i + 1)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut table = extract_table(&train, &alignments, ctx.cfg.get("max_phrase_len")?);
    if let Some(p) = ctx.optional_path("static_dictionary")? {
        let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        let n = table.add_static_dictionary(&text)?;
        eprintln!("added {n} static dictionary entries");
    }
    let out = ctx.artifact(PHRASE_TABLE);
    table.save(&out)?;
    eprintln!("{} phrase pairs -> {}", table.num_pairs(), out.display());
    Ok(())
}

pub fn lm(ctx: &Context) -> Result<()> {
    let train = ctx.train_corpus()?;
    let model = train_lm(&train, ctx.cfg.get("lm_order")?, ctx.cfg.get("lm_discount")?)?;
    let out = ctx.artifact(LM);
    write_checkpoint(&out, &model.to_tensors())?;
    eprintln!("{}-gram LM -> {}", model.order(), out.display());
    Ok(())
}

pub fn train(ctx: &Context) -> Result<()> {
    let train = ctx.train_corpus()?;
    let dev = match (ctx.cfg.path("dev_src"), ctx.cfg.path("dev_tgt")) {
        (None, None) => Vec::new(),
        (Some(_), Some(_)) => ctx.load_corpus("dev_src", "dev_tgt", "dev_chunks")?,
        _ => return Err(Error::Config("dev_src and dev_tgt must be set together".into())),
    };
    let vocabs = build_vocabs(
        &train,
        nonzero(ctx.cfg.get("src_vocab_size")?),
        nonzero(ctx.cfg.get("tgt_vocab_size")?),
    );
    let baseline = ctx.cfg.bool("baseline_mode")?;
    let smt = ctx.load_smt(baseline)?;
    let mcfg = ctx.model_config(&vocabs)?;
    let seed = ctx.seed()?;
    let mut model = Model::new(mcfg, seed)?;
    let max_len = model.config.max_phrase_len;
    let train_set = prepare_examples(&train, &vocabs, &smt, max_len);
    let dev_set = prepare_examples(&dev, &vocabs, &smt, max_len);
    let tc = TrainConfig {
        batch_size: ctx.cfg.get("batch_size")?,
        rho: ctx.cfg.get("rho")?,
        eps: ctx.cfg.get("eps")?,
        clip_norm: ctx.cfg.get("clip_norm")?,
        epochs: ctx.cfg.get("epochs")?,
        seed,
        threads: ctx.threads()?,
        mode: if baseline { LossMode::WordOnly } else { LossMode::Hybrid },
    };
    ctx.save_vocabs(&vocabs)?;
    let log_path = ctx.artifact(TRAIN_LOG);
    let mut log = fs::File::create(&log_path).map_err(|e| Error::io(&log_path, e))?;
    let outcome = trainer::train(&mut model, &smt, &train_set, &dev_set, &tc, |r, _| {
        println!("{}", r.log_line());
        writeln!(log, "{}", r.log_line()).map_err(|e| Error::io(&log_path, e))
    })?;
    let out = ctx.artifact(MODEL);
    let extra = [
        ("baseline_mode".to_string(), baseline.to_string()),
        ("best_epoch".to_string(), outcome.best_epoch.to_string()),
        ("seed".to_string(), seed.to_string()),
    ]
    .into_iter()
    .collect();
    model.save(&out, &extra)?;
    eprintln!("best epoch {} -> {}", outcome.best_epoch, out.display());
    Ok(())
}

fn test_sentences(ctx: &Context) -> Result<Vec<Option<TaggedSentence>>> {
    let src_p = ctx.cfg.existing_path("test_src")?;
    let lines = read_lines(&src_p)?;
    let chunk_lines = match ctx.optional_path("test_chunks")? {
        Some(p) => {
            let c = read_lines(&p)?;
            if c.len() != lines.len() {
                return Err(Error::Format(format!(
                    "{} has {} lines but {} has {}",
                    p.display(),
                    c.len(),
                    src_p.display(),
                    lines.len()
                )));
            }
            Some(c)
        }
        None => None,
    };
    let lexicon = if chunk_lines.is_none() { ctx.lexicon()? } else { None };
    lines
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let toks = split(l);
            if toks.is_empty() {
                return Ok(None);
            }
            let at = |e: Error| Error::Format(format!("{} line {}: {e}", src_p.display(), i + 1));
            let s = match (&chunk_lines, &lexicon) {
                (Some(c), _) => TaggedSentence::new(toks, parse_chunk_line(&c[i]).map_err(at)?).map_err(at)?,
                (None, Some(lex)) => fallback_chunker(&toks, lex),
                (None, None) => TaggedSentence::untagged(toks),
            };
            Ok(Some(s))
        })
        .collect()
}

pub fn translate(ctx: &Context) -> Result<()> {
    let (mut model, side) = Model::load(ctx.require(MODEL, "train")?)?;
    let vocabs = ctx.load_vocabs()?;
    let dims = (vocabs.src.len(), vocabs.tgt.len(), vocabs.tag.len());
    if dims != (model.config.src_vocab, model.config.tgt_vocab, model.config.tag_vocab) {
        return Err(Error::Format("vocabulary files do not match the checkpoint".into()));
    }
    if let Some(l) = ctx.constant_lambda()? {
        model = model.with_constant_lambda(l)?;
    }
    let baseline = ctx.cfg.bool("baseline_mode")? || side.get("baseline_mode").is_some_and(|v| v == "true");
    let smt = ctx.load_smt(baseline)?;
    let decoder = Decoder::new(&model, &smt, &vocabs.tgt, ctx.beam_config()?)?;

    let sentences = test_sentences(ctx)?;
    let max_len = model.config.max_phrase_len;
    let prepared: Vec<PreparedSource> = sentences
        .iter()
        .flatten()
        .map(|s| PreparedSource::new(s.clone(), &vocabs, &smt, max_len))
        .collect();
    let results = ctx.pool()?.install(|| decoder.search_all(&prepared));
    let mut results = results.into_iter();

    let mut output = String::new();
    let mut trace = String::new();
    let mut memory = String::new();
    let mut truncated = 0;
    let mut decoded = prepared.iter();
    for (i, s) in sentences.iter().enumerate() {
        let t = match s {
            None => SentenceTrace { tokens: Vec::new(), fragments: Vec::new(), logprob: 0.0 },
            Some(_) => {
                let r = results.next().expect("one result per prepared source")?;
                let src = decoded.next().expect("one prepared source per sentence");
                truncated += usize::from(r.truncated);
                if ctx.flags.trace {
                    let sctx = decoder.prepare(src)?;
                    for (step, mem) in decoder.replay_memories(&sctx, &r.best)?.iter().enumerate() {
                        let rec = serde_json::json!({ "sentence": i, "step": step, "entries": mem.entries });
                        memory.push_str(&rec.to_string());
                        memory.push('\n');
                    }
                }
                SentenceTrace::from(&r.best)
            }
        };
        output.push_str(&t.tokens.join(" "));
        output.push('\n');
        if ctx.flags.trace {
            trace.push_str(&serde_json::to_string(&t).map_err(|e| Error::Format(e.to_string()))?);
            trace.push('\n');
        }
    }
    let out = ctx.artifact(OUTPUT);
    write_file(&out, output)?;
    if ctx.flags.trace {
        write_file(&ctx.artifact(TRACE), trace)?;
        write_file(&ctx.artifact(MEMORY_DUMP), memory)?;
    }
    if truncated > 0 {
        eprintln!("{truncated} sentences hit max_output_len without finishing");
    }
    eprintln!("{} sentences -> {}", sentences.len(), out.display());
    Ok(())
}

pub fn eval(ctx: &Context) -> Result<()> {
    let hyps = ctx.outputs()?;
    let refs = ctx.references(hyps.len())?;
    let ci = ctx.cfg.bool("case_insensitive")?;
    let report = bleu(&hyps, &refs, 4, ci)?;
    println!("{}", report.summary());
    let ablated = if ctx.flags.null_ablation {
        let traces = ctx.traces()?;
        if traces.len() != hyps.len() {
            return Err(Error::Format(format!("{} traces for {} outputs", traces.len(), hyps.len())));
        }
        let a = bleu(&null_ablation(&traces), &refs, 4, ci)?;
        println!("NULL ablation: {}", a.summary());
        Some(a)
    } else {
        None
    };
    let json = serde_json::json!({ "bleu": report, "null_ablation": ablated });
    write_file(&ctx.artifact(REPORT), format!("{json:#}\n"))
}

pub fn analyze(ctx: &Context) -> Result<()> {
    let traces = ctx.traces()?;
    let refs = ctx.references(traces.len())?;
    let baseline = match ctx.optional_path("baseline_output")? {
        Some(p) => Some(read_lines(&p)?.iter().map(|l| split(l)).collect::<Vec<_>>()),
        None => None,
    };
    if let Some(b) = &baseline {
        if b.len() != traces.len() {
            return Err(Error::Format(format!("baseline output has {} lines for {} traces", b.len(), traces.len())));
        }
    }
    let report = phrase_usage(&traces, &refs, baseline.as_deref())?;
    print!("{}", report.to_table());
    let json = serde_json::json!({ "sentence_pct": report.sentence_pct(), "usage": report });
    write_file(&ctx.artifact(ANALYSIS), format!("{json:#}\n"))
}

pub fn gen_toy(ctx: &Context) -> Result<()> {
    let seed = ctx.seed()?;
    let vocab: usize = ctx.cfg.get("toy_vocab")?;
    let idioms = default_idiom_table(ctx.cfg.get("toy_idioms")?, vocab, seed);
    let corpus = generate_idiom_corpus(&ToyConfig::new(seed, ctx.cfg.get("toy_pairs")?, vocab, idioms.clone()))?;
    let dir = ctx.artifact(TOY_DIR);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut cfg = ctx.cfg.clone();
    for (name, part) in [("train", &corpus.train), ("dev", &corpus.dev), ("test", &corpus.test)] {
        let [s, t, c] = ["src", "tgt", "chunks"].map(|ext| dir.join(format!("{name}.{ext}")));
        write_parallel(part, &s, &t, Some(&c))?;
        let path = |p: &PathBuf| p.display().to_string();
        match name {
            "test" => {
                cfg.set("test_src", &path(&s))?;
                cfg.set("test_chunks", &path(&c))?;
                cfg.set("test_refs", &path(&t))?;
            }
            _ => {
                cfg.set(&format!("{name}_src"), &path(&s))?;
                cfg.set(&format!("{name}_tgt"), &path(&t))?;
                cfg.set(&format!("{name}_chunks"), &path(&c))?;
            }
        }
    }
    let lexicon = lines_to_text(idioms.iter().map(|e| format!("{} ||| {}", e.category, e.source.join(" "))));
    write_file(&dir.join("lexicon.txt"), lexicon)?;
    let conf = dir.join("toy.conf");
    write_file(&conf, format_kv(cfg.values()))?;
    eprintln!(
        "{} train / {} dev / {} test pairs -> {} (config {})",
        corpus.train.len(),
        corpus.dev.len(),
        corpus.test.len(),
        dir.display(),
        conf.display()
    );
    Ok(())
}
