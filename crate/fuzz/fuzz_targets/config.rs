#![no_main]

use libfuzzer_sys::fuzz_target;
use phramem::config::{format_kv, parse_kv, RunConfig};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(map) = parse_kv(text) {
        assert_eq!(parse_kv(&format_kv(&map)).expect("formatted config parses"), map);
    }
    if let Ok(cfg) = RunConfig::parse(text) {
        let _ = cfg.get::<usize>("beam_width");
        let _ = cfg.bool("baseline_mode");
        let _ = cfg.list("test_refs");
    }
});
