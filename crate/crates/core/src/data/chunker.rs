use super::{ChunkSpan, TaggedSentence};
use crate::error::{Error, Result};

/// Known multi-token chunk patterns with their categories.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    entries: Vec<(Vec<String>, String)>,
}

impl Lexicon {
    pub fn new() -> Self {
        Self::default()
    }

    /// Categories must be usable in a chunk line: non-empty, no whitespace, no `;`.
    pub fn insert<S: AsRef<str>>(&mut self, pattern: &[S], category: impl Into<String>) -> Result<()> {
        let category = category.into();
        if category.is_empty() || category.contains(char::is_whitespace) || category.contains(';') {
            return Err(Error::Format(format!("bad lexicon category {category:?}")));
        }
        if pattern.is_empty() {
            return Err(Error::Format(format!("empty lexicon pattern for {category}")));
        }
        let p: Vec<String> = pattern.iter().map(|s| s.as_ref().to_string()).collect();
        self.entries.push((p, category));
        Ok(())
    }

    /// One `CATEGORY ||| tok tok ...` pattern per line; blank lines skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lex = Lexicon::new();
        for (ln, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let err = || Error::Format(format!("lexicon line {}: expected CATEGORY ||| tokens", ln + 1));
            let (cat, pat) = line.split_once("|||").ok_or_else(err)?;
            let pat: Vec<&str> = pat.split_whitespace().collect();
            if pat.iter().any(|t| t.contains("|||")) {
                return Err(err());
            }
            lex.insert(&pat, cat.trim()).map_err(|e| Error::Format(format!("lexicon line {}: {e}", ln + 1)))?;
        }
        Ok(lex)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Leftmost-longest lexicon matcher. Unmatched tokens stay outside chunks.
pub fn fallback_chunker(tokens: &[String], lexicon: &Lexicon) -> TaggedSentence {
    let mut chunks = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let best = lexicon
            .entries
            .iter()
            .filter(|(p, _)| tokens[i..].starts_with(p))
            .max_by(|a, b| a.0.len().cmp(&b.0.len()).then_with(|| b.1.cmp(&a.1)));
        match best {
            Some((p, cat)) => {
                chunks.push(ChunkSpan::new(i, i + p.len(), cat.clone()));
                i += p.len();
            }
            None => i += 1,
        }
    }
    TaggedSentence::new(tokens.to_vec(), chunks).expect("matcher emits disjoint in-bounds spans")
}
