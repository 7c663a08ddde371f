#![no_main]

use libfuzzer_sys::fuzz_target;
use phramem::eval::{null_ablation, SentenceTrace};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(t) = SentenceTrace::parse(text) {
        let out = null_ablation(std::slice::from_ref(&t));
        assert_eq!(out.len(), 1);
    }
});
