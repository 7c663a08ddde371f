#![no_main]

use libfuzzer_sys::fuzz_target;
use phramem::numerics::{decode_checkpoint, encode_checkpoint};

fuzz_target!(|data: &[u8]| {
    if let Ok(tensors) = decode_checkpoint(data) {
        let again = decode_checkpoint(&encode_checkpoint(&tensors)).expect("re-encoded checkpoint decodes");
        assert_eq!(again.len(), tensors.len());
        for ((a, x), (b, y)) in tensors.iter().zip(&again) {
            assert_eq!(a, b);
            assert_eq!(x.shape(), y.shape());
        }
    }
});
