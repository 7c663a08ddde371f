use crate::data::{ChunkSpan, ParallelExample, TaggedSentence, Vocab};
use crate::memory::SmtModel;
use crate::nmt::{Model, ModelConfig, Vocabs};
use crate::smt::{NGramLM, PhraseTable, PhraseTranslation, SmtFeatureWeights};
use crate::trainer::PreparedExample;

pub fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

pub fn vocabs() -> Vocabs {
    Vocabs {
        src: Vocab::from_ranked(toks("a b c d e")),
        tgt: Vocab::from_ranked(toks("u v w x y z")),
        tag: Vocab::from_ranked(toks("O NP_B NP VP_B VP")),
    }
}

pub fn translation(target: &str, logp: f64) -> PhraseTranslation {
    PhraseTranslation { target: toks(target), logp_tgt_given_src: logp, logp_src_given_tgt: logp, count: 1 }
}

/// `a b -> u v | u`, `c d -> w x | w x y`.
pub fn smt() -> SmtModel {
    let mut t = PhraseTable::new();
    t.insert(toks("a b"), translation("u v", -0.2));
    t.insert(toks("a b"), translation("u", -0.5));
    t.insert(toks("c d"), translation("w x", -0.4));
    t.insert(toks("c d"), translation("w x y", -0.9));
    let lm = NGramLM::train(&[toks("u v w x y"), toks("w x u v z")], 3, 0.75).unwrap();
    SmtModel::new(t, lm, SmtFeatureWeights::default())
}

pub fn tiny_config(v: &Vocabs) -> ModelConfig {
    let mut c = ModelConfig::new(v.src.len(), v.tgt.len(), v.tag.len());
    c.word_dim = 3;
    c.tag_dim = 2;
    c.hidden = 3;
    c.att_dim = 2;
    c.out_hidden = 3;
    c.balancer_hidden = [3, 2];
    c.scorer_hidden = [3, 2];
    c.dropout = 0.0;
    c.init_scale = 0.5;
    c
}

pub fn tiny_model(seed: u64) -> Model {
    Model::new(tiny_config(&vocabs()), seed).unwrap()
}

pub fn example(src: &str, chunks: &[(usize, usize, &str)], tgt: &str) -> ParallelExample {
    let spans = chunks.iter().map(|&(s, e, c)| ChunkSpan::new(s, e, c)).collect();
    ParallelExample { source: TaggedSentence::new(toks(src), spans).unwrap(), target: toks(tgt) }
}

pub fn prepared(src: &str, chunks: &[(usize, usize, &str)], tgt: &str, smt: &SmtModel) -> PreparedExample {
    PreparedExample::new(&example(src, chunks, tgt), &vocabs(), smt, 7)
}
