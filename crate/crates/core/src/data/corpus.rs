use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Tag carried by tokens outside every chunk.
pub const OUTSIDE_TAG: &str = "O";
pub const DEFAULT_MAX_LEN: usize = 50;

/// Half-open chunk span `[start, end)` with its syntactic category.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub struct ChunkSpan {
    pub start: usize,
    pub end: usize,
    pub category: String,
}

impl ChunkSpan {
    pub fn new(start: usize, end: usize, category: impl Into<String>) -> Self {
        ChunkSpan {
            start,
            end,
            category: category.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

/// Source sentence with chunk spans and per-token tags.
///
/// The first token of a chunk is tagged `CAT_B`, the rest `CAT`; tokens
/// outside chunks get [`OUTSIDE_TAG`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedSentence {
    pub tokens: Vec<String>,
    pub tags: Vec<String>,
    pub chunks: Vec<ChunkSpan>,
}

impl TaggedSentence {
    pub fn new(tokens: Vec<String>, mut chunks: Vec<ChunkSpan>) -> Result<Self> {
        chunks.sort();
        let mut prev_end = 0;
        for c in &chunks {
            if c.start >= c.end || c.end > tokens.len() {
                return Err(Error::Format(format!(
                    "chunk {}..{} out of bounds for {} tokens",
                    c.start,
                    c.end,
                    tokens.len()
                )));
            }
            if c.start < prev_end {
                return Err(Error::Format(format!("chunk {}..{} overlaps its predecessor", c.start, c.end)));
            }
            if c.category.is_empty() || c.category.contains(char::is_whitespace) || c.category.contains(';') {
                return Err(Error::Format(format!("bad chunk category {:?}", c.category)));
            }
            prev_end = c.end;
        }
        let tags = tags_for(tokens.len(), &chunks);
        Ok(TaggedSentence { tokens, tags, chunks })
    }

    pub fn untagged(tokens: Vec<String>) -> Self {
        let tags = vec![OUTSIDE_TAG.to_string(); tokens.len()];
        TaggedSentence {
            tokens,
            tags,
            chunks: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Tags after demoting every chunk for which `keep` is false to the
    /// outside tag.
    pub fn tags_keeping<F: Fn(&ChunkSpan) -> bool>(&self, keep: F) -> Vec<String> {
        let kept: Vec<ChunkSpan> = self.chunks.iter().filter(|c| keep(c)).cloned().collect();
        tags_for(self.tokens.len(), &kept)
    }
}

fn tags_for(n: usize, chunks: &[ChunkSpan]) -> Vec<String> {
    let mut tags = vec![OUTSIDE_TAG.to_string(); n];
    for c in chunks {
        tags[c.start] = format!("{}_B", c.category);
        for t in &mut tags[c.start + 1..c.end] {
            *t = c.category.clone();
        }
    }
    tags
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParallelExample {
    pub source: TaggedSentence,
    pub target: Vec<String>,
}

/// Parses one chunk line: `start end CAT; start end CAT`, end exclusive.
/// A blank line means no chunks.
pub fn parse_chunk_line(line: &str) -> Result<Vec<ChunkSpan>> {
    let mut out = Vec::new();
    for part in line.split(';') {
        let fields: Vec<&str> = part.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 3 {
            return Err(Error::Format(format!("malformed chunk triple {:?}", part.trim())));
        }
        let start: usize = fields[0]
            .parse()
            .map_err(|_| Error::Format(format!("bad chunk start {:?}", fields[0])))?;
        let end: usize = fields[1]
            .parse()
            .map_err(|_| Error::Format(format!("bad chunk end {:?}", fields[1])))?;
        out.push(ChunkSpan::new(start, end, fields[2]));
    }
    Ok(out)
}

pub fn format_chunk_line(chunks: &[ChunkSpan]) -> String {
    chunks
        .iter()
        .map(|c| format!("{} {} {}", c.start, c.end, c.category))
        .collect::<Vec<_>>()
        .join("; ")
}

pub fn read_lines(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let text = fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
    Ok(text.lines().map(str::to_string).collect())
}

#[derive(Debug, Clone)]
pub struct LoadedCorpus {
    pub examples: Vec<ParallelExample>,
    /// Pairs dropped for exceeding the length limit or being empty.
    pub dropped: usize,
}

pub fn load_parallel(
    src_path: impl AsRef<Path>,
    tgt_path: impl AsRef<Path>,
    chunk_path: Option<&Path>,
    max_len: usize,
) -> Result<LoadedCorpus> {
    let src = read_lines(&src_path)?;
    let tgt = read_lines(&tgt_path)?;
    let chunks = chunk_path.map(read_lines).transpose()?;
    parse_parallel(&src, &tgt, chunks.as_deref(), max_len)
}

pub(crate) fn parse_parallel(
    src: &[String],
    tgt: &[String],
    chunks: Option<&[String]>,
    max_len: usize,
) -> Result<LoadedCorpus> {
    if src.len() != tgt.len() {
        return Err(Error::Format(format!(
            "source has {} lines but target has {} (line {} is unmatched)",
            src.len(),
            tgt.len(),
            src.len().min(tgt.len()) + 1
        )));
    }
    if let Some(c) = chunks {
        if c.len() != src.len() {
            return Err(Error::Format(format!(
                "chunk file has {} lines but source has {} (line {} is unmatched)",
                c.len(),
                src.len(),
                c.len().min(src.len()) + 1
            )));
        }
    }
    let mut examples = Vec::with_capacity(src.len());
    let mut dropped = 0;
    for (i, (s, t)) in src.iter().zip(tgt).enumerate() {
        let s_toks: Vec<String> = s.split_whitespace().map(String::from).collect();
        let t_toks: Vec<String> = t.split_whitespace().map(String::from).collect();
        let spans = match chunks {
            Some(c) => parse_chunk_line(&c[i]).map_err(|e| Error::Format(format!("line {}: {e}", i + 1)))?,
            None => Vec::new(),
        };
        if s_toks.is_empty() || t_toks.is_empty() || s_toks.len() > max_len || t_toks.len() > max_len {
            dropped += 1;
            continue;
        }
        let source = TaggedSentence::new(s_toks, spans).map_err(|e| Error::Format(format!("line {}: {e}", i + 1)))?;
        examples.push(ParallelExample { source, target: t_toks });
    }
    Ok(LoadedCorpus { examples, dropped })
}

pub fn write_parallel(
    examples: &[ParallelExample],
    src_path: impl AsRef<Path>,
    tgt_path: impl AsRef<Path>,
    chunk_path: Option<&Path>,
) -> Result<()> {
    let mut s = String::new();
    let mut t = String::new();
    let mut c = String::new();
    for ex in examples {
        s.push_str(&ex.source.tokens.join(" "));
        s.push('\n');
        t.push_str(&ex.target.join(" "));
        t.push('\n');
        c.push_str(&format_chunk_line(&ex.source.chunks));
        c.push('\n');
    }
    fs::write(src_path.as_ref(), s).map_err(|e| Error::io(src_path.as_ref(), e))?;
    fs::write(tgt_path.as_ref(), t).map_err(|e| Error::io(tgt_path.as_ref(), e))?;
    if let Some(p) = chunk_path {
        fs::write(p, c).map_err(|e| Error::io(p, e))?;
    }
    Ok(())
}
