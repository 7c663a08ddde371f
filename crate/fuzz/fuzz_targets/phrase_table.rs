#![no_main]

use libfuzzer_sys::fuzz_target;
use phramem::smt::PhraseTable;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(table) = PhraseTable::parse(text) {
        let again = PhraseTable::parse(&table.to_text()).expect("formatted table parses");
        assert_eq!(again.num_pairs(), table.num_pairs());
    }
});
