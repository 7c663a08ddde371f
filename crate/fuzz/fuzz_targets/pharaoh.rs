#![no_main]

use libfuzzer_sys::fuzz_target;
use phramem::smt::{extract_phrases, format_pharaoh, parse_pharaoh};

fuzz_target!(|data: &[u8]| {
    if data.len() < 2 {
        return;
    }
    let (src_len, tgt_len) = (usize::from(data[0] % 12), usize::from(data[1] % 12));
    let Ok(text) = std::str::from_utf8(&data[2..]) else { return };
    if let Ok(a) = parse_pharaoh(text, src_len, tgt_len) {
        let again = parse_pharaoh(&format_pharaoh(&a), src_len, tgt_len).expect("formatted alignment parses");
        assert_eq!(again, a);
        let _ = extract_phrases(&a, 7);
    }
});
