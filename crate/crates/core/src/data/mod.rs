//! Corpus ingestion, chunk tagging and vocabularies.

mod chunker;
mod corpus;
mod toy;
mod vocab;

pub use chunker::{fallback_chunker, Lexicon};
pub use corpus::{
    format_chunk_line, load_parallel, parse_chunk_line, read_lines, write_parallel, ChunkSpan,
    LoadedCorpus, ParallelExample, TaggedSentence, DEFAULT_MAX_LEN, OUTSIDE_TAG,
};
pub use toy::{default_idiom_table, generate_idiom_corpus, IdiomEntry, ToyConfig, ToyCorpus};
pub use vocab::{build_vocab, Side, Vocab, BOS, EOS, PAD, RESERVED, UNK};
