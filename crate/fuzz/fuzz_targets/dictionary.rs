#![no_main]

use libfuzzer_sys::fuzz_target;
use phramem::smt::PhraseTable;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let mut table = PhraseTable::new();
    if let Ok(n) = table.add_static_dictionary(text) {
        assert!(table.num_pairs() <= n);
        PhraseTable::parse(&table.to_text()).expect("dictionary table round-trips");
    }
});
