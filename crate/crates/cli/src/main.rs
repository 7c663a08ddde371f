mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};
use phramem::config::{keys_help, RunConfig};
use phramem::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "phramem", version, about = "Hybrid NMT with an SMT phrase memory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// `key = value` run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides one config key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write per-sentence derivations and memory dumps when translating.
    #[arg(long, global = true)]
    trace: bool,
    /// Use an empty phrase table (word-only attention NMT).
    #[arg(long, global = true)]
    baseline_mode: bool,
    /// Fix the balancer output to this value.
    #[arg(long, global = true, value_name = "V")]
    constant_lambda: Option<f64>,
    /// Also score outputs with generated phrases replaced by NULL.
    #[arg(long, global = true)]
    null_ablation: bool,
    /// Reference files for eval/analyze; overrides `test_refs`.
    #[arg(long, global = true, num_args = 1..)]
    refs: Vec<PathBuf>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Word-align the training corpus.
    Align,
    /// Extract the phrase table from the alignments.
    Extract,
    /// Train the n-gram language model on the training targets.
    Lm,
    /// Train the neural model.
    Train,
    /// Decode the test sources.
    Translate,
    /// Score the translations with BLEU.
    Eval,
    /// Phrase usage breakdown of a traced translation run.
    Analyze,
    /// Generate the synthetic idiom corpus.
    GenToy,
}

/// Global switches after merging into the config.
#[derive(Debug, Clone)]
pub struct Flags {
    pub trace: bool,
    pub null_ablation: bool,
    pub refs: Vec<PathBuf>,
}

fn build_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p).map_err(|e| match e {
            Error::Io { path, source } => Error::Config(format!("cannot read config {path}: {source}")),
            other => other,
        })?,
        None => RunConfig::default(),
    };
    for kv in &cli.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(s) = cli.seed {
        cfg.set("seed", &s.to_string())?;
    }
    if let Some(t) = cli.threads {
        cfg.set("threads", &t.to_string())?;
    }
    if cli.baseline_mode {
        cfg.set("baseline_mode", "true")?;
    }
    if let Some(l) = cli.constant_lambda {
        cfg.set("constant_lambda", &format!("{l:?}"))?;
    }
    Ok(cfg)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidArgument(_) => 2,
        Error::Format(_) | Error::Io { .. } => 3,
        Error::Divergence(_) | Error::Numeric(_) => 4,
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = build_config(&cli)?;
    let flags = Flags { trace: cli.trace, null_ablation: cli.null_ablation, refs: cli.refs.clone() };
    let ctx = commands::Context::new(cfg, flags)?;
    match cli.command {
        Command::Align => commands::align(&ctx),
        Command::Extract => commands::extract(&ctx),
        Command::Lm => commands::lm(&ctx),
        Command::Train => commands::train(&ctx),
        Command::Translate => commands::translate(&ctx),
        Command::Eval => commands::eval(&ctx),
        Command::Analyze => commands::analyze(&ctx),
        Command::GenToy => commands::gen_toy(&ctx),
    }
}

fn main() -> ExitCode {
    let matches = Cli::command().after_long_help(keys_help()).after_help(keys_help()).get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{line}");
            ExitCode::from(exit_code(&e))
        }
    }
}
