use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::ParallelExample;
use crate::error::{Error, Result};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const BOS: usize = 2;
pub const EOS: usize = 3;
pub const RESERVED: [&str; 4] = ["<pad>", "<unk>", "<s>", "</s>"];

/// Token/id bijection with the four reserved symbols at ids 0..4.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Source,
    Target,
    /// Chunk tags of the source side.
    Tag,
}

impl Vocab {
    /// Builds from tokens already in rank order (reserved symbols excluded).
    pub fn from_ranked<I, S>(ranked: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut v = Vocab {
            tokens: Vec::new(),
            index: HashMap::new(),
        };
        for r in RESERVED {
            v.push(r.to_string());
        }
        for t in ranked {
            let t = t.into();
            if !v.index.contains_key(&t) {
                v.push(t);
            }
        }
        v
    }

    fn push(&mut self, t: String) {
        self.index.insert(t.clone(), self.tokens.len());
        self.tokens.push(t);
    }

    /// Ranks by descending frequency, ties broken lexicographically, and keeps
    /// at most `max_size` non-reserved entries.
    pub fn from_counts(counts: &HashMap<String, usize>, max_size: Option<usize>) -> Self {
        let mut ranked: Vec<(&String, &usize)> = counts
            .iter()
            .filter(|(t, _)| !RESERVED.contains(&t.as_str()))
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(a.1).then_with(|| a.0.cmp(b.0)));
        if let Some(m) = max_size {
            ranked.truncate(m);
        }
        Self::from_ranked(ranked.into_iter().map(|(t, _)| t.clone()))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Id of `token`, or [`UNK`] when it is not in the shortlist.
    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn token(&self, id: usize) -> &str {
        self.tokens.get(id).map_or(RESERVED[UNK], |s| s.as_str())
    }

    pub fn ids<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// One token per line, rank order, reserved symbols first.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for t in &self.tokens {
            s.push_str(t);
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let lines: Vec<&str> = text.lines().collect();
        if lines.len() < RESERVED.len() {
            return Err(Error::Format("vocab file lacks reserved symbols".into()));
        }
        for (i, r) in RESERVED.iter().enumerate() {
            if lines[i] != *r {
                return Err(Error::Format(format!(
                    "vocab line {} must be {r:?}, found {:?}",
                    i + 1,
                    lines[i]
                )));
            }
        }
        let mut v = Vocab::from_ranked(std::iter::empty::<String>());
        for (i, t) in lines[RESERVED.len()..].iter().enumerate() {
            if t.is_empty() || t.chars().any(char::is_whitespace) {
                return Err(Error::Format(format!(
                    "vocab line {} is not a single token",
                    i + RESERVED.len() + 1
                )));
            }
            if v.contains(t) {
                return Err(Error::Format(format!("duplicate vocab entry {t:?}")));
            }
            v.push(t.to_string());
        }
        Ok(v)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path.as_ref(), self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
        Self::parse(&text)
    }
}

/// Frequency-ranked vocabulary over one side of the corpus.
pub fn build_vocab(examples: &[ParallelExample], side: Side, max_size: Option<usize>) -> Vocab {
    let mut counts: HashMap<String, usize> = HashMap::new();
    for ex in examples {
        let toks: &[String] = match side {
            Side::Source => &ex.source.tokens,
            Side::Target => &ex.target,
            Side::Tag => &ex.source.tags,
        };
        for t in toks {
            *counts.entry(t.clone()).or_default() += 1;
        }
    }
    if side == Side::Tag {
        counts.entry(super::OUTSIDE_TAG.to_string()).or_default();
    }
    Vocab::from_counts(&counts, max_size)
}
