#![no_main]

use libfuzzer_sys::fuzz_target;
use phramem::data::{fallback_chunker, Lexicon};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(lex) = Lexicon::parse(text) {
        let tokens: Vec<String> = text.split_whitespace().take(32).map(String::from).collect();
        let s = fallback_chunker(&tokens, &lex);
        assert_eq!(s.tags.len(), tokens.len());
    }
});
