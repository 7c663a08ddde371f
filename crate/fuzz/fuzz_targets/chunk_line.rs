#![no_main]

use libfuzzer_sys::fuzz_target;
use phramem::data::{format_chunk_line, parse_chunk_line, TaggedSentence};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(chunks) = parse_chunk_line(text) {
        assert_eq!(parse_chunk_line(&format_chunk_line(&chunks)).expect("formatted line parses"), chunks);
        let n = chunks.iter().map(|c| c.end).max().unwrap_or(0);
        if n > 256 {
            return;
        }
        let tokens = (0..n).map(|i| i.to_string()).collect();
        let _ = TaggedSentence::new(tokens, chunks);
    }
});
