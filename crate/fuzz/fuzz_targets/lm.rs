#![no_main]

use libfuzzer_sys::fuzz_target;
use phramem::numerics::decode_checkpoint;
use phramem::smt::NGramLM;

fuzz_target!(|data: &[u8]| {
    let Ok(tensors) = decode_checkpoint(data) else { return };
    if let Ok(lm) = NGramLM::from_tensors(&tensors) {
        for w in ["a", "</s>", "<unk>", "never-seen"] {
            let p = lm.prob(&["a", "b"], w);
            assert!(p.is_finite() && p >= 0.0);
        }
    }
});
