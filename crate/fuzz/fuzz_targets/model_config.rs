#![no_main]

use libfuzzer_sys::fuzz_target;
use phramem::config::parse_kv;
use phramem::nmt::{Model, ModelConfig};
use phramem::numerics::{decode_checkpoint, encode_checkpoint};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(map) = parse_kv(text) else { return };
    let Ok(cfg) = ModelConfig::from_map(&map) else { return };
    let again = ModelConfig::from_map(&cfg.to_map()).expect("formatted model config parses");
    assert_eq!(again.to_map(), cfg.to_map());
    let dims = [cfg.src_vocab, cfg.tgt_vocab, cfg.tag_vocab, cfg.word_dim, cfg.tag_dim, cfg.hidden, cfg.att_dim, cfg.out_hidden];
    if dims.iter().chain(&cfg.balancer_hidden).chain(&cfg.scorer_hidden).all(|&d| d <= 64) {
        let model = Model::new(cfg, 0).expect("validated config builds");
        let tensors = model.checkpoint_tensors();
        assert_eq!(decode_checkpoint(&encode_checkpoint(&tensors)).unwrap().len(), tensors.len());
    }
});
