use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::data::RESERVED;
use crate::decoder::{FragmentKind, FragmentRecord, Hypothesis};
use crate::error::{Error, Result};
use crate::nmt::Model;

pub const NULL_TOKEN: &str = "NULL";

/// One decoded sentence as written by the translate trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceTrace {
    pub tokens: Vec<String>,
    pub fragments: Vec<FragmentRecord>,
    pub logprob: f64,
}

impl SentenceTrace {
    pub fn parse(line: &str) -> Result<Self> {
        let t: SentenceTrace =
            serde_json::from_str(line).map_err(|e| Error::Format(format!("bad trace record: {e}")))?;
        if t.fragments.iter().any(|f| f.tokens.is_empty()) {
            return Err(Error::Format("trace fragment without tokens".into()));
        }
        Ok(t)
    }

    pub fn phrases(&self) -> impl Iterator<Item = &FragmentRecord> {
        self.fragments.iter().filter(|f| f.kind == FragmentKind::Phrase)
    }
}

impl From<&Hypothesis> for SentenceTrace {
    fn from(h: &Hypothesis) -> Self {
        SentenceTrace { tokens: h.output().to_vec(), fragments: h.fragments.clone(), logprob: h.logprob }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct UsageCell {
    pub total: usize,
    pub correct: usize,
    pub new_total: usize,
    pub new_correct: usize,
}

impl UsageCell {
    fn add(&mut self, correct: bool, new: Option<bool>) {
        self.total += 1;
        self.correct += usize::from(correct);
        if new == Some(true) {
            self.new_total += 1;
            self.new_correct += usize::from(correct);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhraseUsageReport {
    pub sentences: usize,
    pub sentences_with_phrase: usize,
    pub total: UsageCell,
    pub by_category: BTreeMap<String, UsageCell>,
    pub by_length: BTreeMap<usize, UsageCell>,
    /// Whether the `new_*` fields were computed against a baseline.
    pub has_baseline: bool,
}

fn pct(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        100.0 * a as f64 / b as f64
    }
}

impl PhraseUsageReport {
    pub fn sentence_pct(&self) -> f64 {
        pct(self.sentences_with_phrase, self.sentences)
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "sentences with phrases: {}/{} ({:.1}%)",
            self.sentences_with_phrase,
            self.sentences,
            self.sentence_pct()
        );
        let rows = |s: &mut String, name: String, c: &UsageCell, all: &UsageCell| {
            let _ = write!(
                s,
                "{name:<10} {:>6.1}% {:>6.1}%",
                pct(c.total, all.total),
                pct(c.correct, c.total)
            );
            if self.has_baseline {
                let _ = write!(s, " {:>6.1}% {:>6.1}%", pct(c.new_total, all.new_total), pct(c.new_correct, c.new_total));
            }
            s.push('\n');
        };
        let header = if self.has_baseline { "share  correct  new-share  new-correct" } else { "share  correct" };
        let _ = writeln!(s, "category   {header}");
        for (k, c) in &self.by_category {
            rows(&mut s, k.clone(), c, &self.total);
        }
        let _ = writeln!(s, "length     {header}");
        for (k, c) in &self.by_length {
            rows(&mut s, k.to_string(), c, &self.total);
        }
        s
    }
}

fn contains_run(haystack: &[String], needle: &[String]) -> bool {
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle)
}

/// Phrase statistics of decoded traces. A phrase is correct when it occurs
/// contiguously in some reference, and new when the baseline output for the
/// same sentence does not contain it.
pub fn phrase_usage<R: AsRef<[Vec<String>]>>(
    traces: &[SentenceTrace],
    references: &[R],
    baseline: Option<&[Vec<String>]>,
) -> Result<PhraseUsageReport> {
    if traces.len() != references.len() || baseline.is_some_and(|b| b.len() != traces.len()) {
        return Err(Error::InvalidArgument("traces, references and baseline must be line-aligned".into()));
    }
    let mut report = PhraseUsageReport {
        sentences: traces.len(),
        sentences_with_phrase: 0,
        total: UsageCell::default(),
        by_category: BTreeMap::new(),
        by_length: BTreeMap::new(),
        has_baseline: baseline.is_some(),
    };
    for (i, t) in traces.iter().enumerate() {
        let mut any = false;
        for f in t.phrases() {
            any = true;
            let correct = references[i].as_ref().iter().any(|r| contains_run(r, &f.tokens));
            let new = baseline.map(|b| !contains_run(&b[i], &f.tokens));
            let cat = f.span.as_ref().map_or_else(|| "?".to_string(), |s| s.category.clone());
            report.total.add(correct, new);
            report.by_category.entry(cat).or_default().add(correct, new);
            report.by_length.entry(f.tokens.len()).or_default().add(correct, new);
        }
        report.sentences_with_phrase += usize::from(any);
    }
    Ok(report)
}

/// Outputs with every generated phrase replaced by a single `NULL` token.
pub fn null_ablation(traces: &[SentenceTrace]) -> Vec<Vec<String>> {
    let eos = RESERVED[3];
    traces
        .iter()
        .map(|t| {
            let mut out = Vec::new();
            for f in &t.fragments {
                match f.kind {
                    FragmentKind::Phrase => out.push(NULL_TOKEN.to_string()),
                    FragmentKind::Word if f.tokens.len() == 1 && f.tokens[0] == eos => {}
                    FragmentKind::Word => out.extend(f.tokens.iter().cloned()),
                }
            }
            out
        })
        .collect()
}

/// The same model with its balancer replaced by a constant.
pub fn constant_lambda_mode(model: &Model, value: f64) -> Result<Model> {
    model.with_constant_lambda(value)
}
