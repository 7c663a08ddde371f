use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::numerics::Tensor;

const BOS: &str = "<s>";
const EOS: &str = "</s>";
const UNK: &str = "<unk>";
/// Counts are stored as f64 and stay exact up to 2^53.
const MAX_COUNT: f64 = 9_007_199_254_740_992.0;

#[derive(Debug, Clone, Default, PartialEq)]
struct ContextStats {
    total: u64,
    words: HashMap<u32, u64>,
}

/// Interpolated absolute-discounting n-gram model.
///
/// ```text
/// p(w | h) = max(c(h, w) - D, 0) / c(h, .) + D * N1+(h, .) / c(h, .) * p(w | h')
/// ```
///
/// where `h'` drops the oldest word. Unseen contexts back off to `p(w | h')`
/// unchanged, and the recursion bottoms out in a uniform distribution over
/// the predictable vocabulary (observed words, `</s>`, `<unk>`).
#[derive(Debug, Clone, PartialEq)]
pub struct NGramLM {
    order: usize,
    discount: f64,
    tokens: Vec<String>,
    ids: HashMap<String, u32>,
    /// `tables[k]` maps a context of length `k` to its continuation counts.
    tables: Vec<HashMap<Vec<u32>, ContextStats>>,
}

impl NGramLM {
    pub const DEFAULT_ORDER: usize = 4;
    pub const DEFAULT_DISCOUNT: f64 = 0.75;

    fn empty(order: usize, discount: f64) -> Result<Self> {
        if order == 0 {
            return Err(Error::Config("LM order must be at least 1".into()));
        }
        if !(discount > 0.0 && discount <= 1.0) {
            return Err(Error::Config(format!("LM discount {discount} outside (0, 1]")));
        }
        let mut lm = NGramLM {
            order,
            discount,
            tokens: Vec::new(),
            ids: HashMap::new(),
            tables: vec![HashMap::new(); order],
        };
        for t in [BOS, EOS, UNK] {
            lm.intern(t);
        }
        Ok(lm)
    }

    fn intern(&mut self, tok: &str) -> u32 {
        if let Some(&id) = self.ids.get(tok) {
            return id;
        }
        let id = self.tokens.len() as u32;
        self.tokens.push(tok.to_string());
        self.ids.insert(tok.to_string(), id);
        id
    }

    pub fn train<S: AsRef<str>>(sentences: &[Vec<S>], order: usize, discount: f64) -> Result<Self> {
        let mut lm = Self::empty(order, discount)?;
        let bos = lm.ids[BOS];
        for sent in sentences {
            let mut seq = vec![bos; order - 1];
            seq.extend(sent.iter().map(|w| lm.intern(w.as_ref())));
            seq.push(lm.ids[EOS]);
            for pos in order - 1..seq.len() {
                let w = seq[pos];
                for k in 0..order {
                    let ctx = seq[pos - k..pos].to_vec();
                    let stats = lm.tables[k].entry(ctx).or_default();
                    stats.total += 1;
                    *stats.words.entry(w).or_default() += 1;
                }
            }
        }
        Ok(lm)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    /// Words that can be predicted: everything except `<s>`.
    pub fn vocabulary(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(String::as_str).filter(|t| *t != BOS)
    }

    fn vocab_size(&self) -> usize {
        self.tokens.len() - 1
    }

    fn id(&self, w: &str) -> u32 {
        self.ids.get(w).copied().unwrap_or(self.ids[UNK])
    }

    fn prob_ids(&self, ctx: &[u32], w: u32) -> f64 {
        let lower = if ctx.is_empty() {
            1.0 / self.vocab_size() as f64
        } else {
            self.prob_ids(&ctx[1..], w)
        };
        match self.tables[ctx.len()].get(ctx) {
            Some(stats) => {
                let c = stats.words.get(&w).copied().unwrap_or(0) as f64;
                let total = stats.total as f64;
                let types = stats.words.len() as f64;
                (c - self.discount).max(0.0) / total + self.discount * types / total * lower
            }
            None => lower,
        }
    }

    /// `p(word | history)`; the history is left-padded with `<s>` and cut to
    /// the last `order - 1` words. Unknown words score as `<unk>`.
    pub fn prob<S: AsRef<str>>(&self, history: &[S], word: &str) -> f64 {
        let n = self.order - 1;
        let mut ctx: Vec<u32> = vec![self.ids[BOS]; n.saturating_sub(history.len())];
        let skip = history.len().saturating_sub(n);
        ctx.extend(history[skip..].iter().map(|w| self.id(w.as_ref())));
        self.prob_ids(&ctx, self.id(word))
    }

    /// Context-free distribution at the bottom of the recursion.
    pub fn unigram(&self, word: &str) -> f64 {
        self.prob_ids(&[], self.id(word))
    }

    pub fn logprob<S: AsRef<str>>(&self, history: &[S], word: &str) -> f64 {
        self.prob(history, word).ln()
    }

    /// Log-probability of `phrase` continuing `history`.
    pub fn continuation_logprob<S: AsRef<str>, T: AsRef<str>>(&self, history: &[S], phrase: &[T]) -> f64 {
        let mut h: Vec<&str> = history.iter().map(|s| s.as_ref()).collect();
        let mut total = 0.0;
        for w in phrase {
            total += self.logprob(&h, w.as_ref());
            h.push(w.as_ref());
        }
        total
    }

    /// Serializes into named tensors for the checkpoint container.
    pub fn to_tensors(&self) -> Vec<(String, Tensor)> {
        let mut out = vec![(
            "lm.config".to_string(),
            Tensor::vector(vec![self.order as f64, self.discount]),
        )];
        for (id, t) in self.tokens.iter().enumerate() {
            out.push((format!("lm.token.{t}"), Tensor::vector(vec![id as f64])));
        }
        for k in 0..self.order {
            let mut rows: Vec<Vec<f64>> = Vec::new();
            for (ctx, stats) in &self.tables[k] {
                for (&w, &c) in &stats.words {
                    let mut row: Vec<f64> = ctx.iter().map(|&x| x as f64).collect();
                    row.push(w as f64);
                    row.push(c as f64);
                    rows.push(row);
                }
            }
            if rows.is_empty() {
                continue;
            }
            rows.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let n = rows.len();
            let data = rows.into_iter().flatten().collect();
            out.push((format!("lm.ngrams.{k}"), Tensor::new(vec![n, k + 2], data).unwrap()));
        }
        out
    }

    pub fn from_tensors(tensors: &[(String, Tensor)]) -> Result<Self> {
        let bad = |m: &str| Error::Format(format!("LM container: {m}"));
        let cfg = tensors
            .iter()
            .find(|(n, _)| n == "lm.config")
            .ok_or_else(|| bad("missing lm.config"))?
            .1
            .data();
        if cfg.len() != 2 || cfg[0].fract() != 0.0 || cfg[0] < 1.0 || cfg[0] > 64.0 {
            return Err(bad("malformed lm.config"));
        }
        let mut lm = Self::empty(cfg[0] as usize, cfg[1])?;
        lm.tokens.clear();
        lm.ids.clear();
        let mut toks: Vec<(usize, String)> = Vec::new();
        for (name, t) in tensors {
            if let Some(tok) = name.strip_prefix("lm.token.") {
                let id = match t.data() {
                    &[id] if id.fract() == 0.0 && (0.0..=u32::MAX as f64).contains(&id) => id,
                    _ => return Err(bad("malformed token id")),
                };
                toks.push((id as usize, tok.to_string()));
            }
        }
        toks.sort();
        for (i, (id, tok)) in toks.into_iter().enumerate() {
            if id != i {
                return Err(bad("token ids are not contiguous"));
            }
            lm.tokens.push(tok.clone());
            lm.ids.insert(tok, id as u32);
        }
        for t in [BOS, EOS, UNK] {
            if !lm.ids.contains_key(t) {
                return Err(bad("reserved tokens missing"));
            }
        }
        let n_tok = lm.tokens.len() as f64;
        for (name, t) in tensors {
            let Some(k) = name.strip_prefix("lm.ngrams.") else { continue };
            let k: usize = k.parse().map_err(|_| bad("bad n-gram table name"))?;
            if k >= lm.order || t.shape() != [t.shape()[0], k + 2] {
                return Err(bad("n-gram table shape mismatch"));
            }
            for row in t.data().chunks_exact(k + 2) {
                let ids = &row[..k + 1];
                let c = row[k + 1];
                if ids.iter().any(|&x| x.fract() != 0.0 || x < 0.0 || x >= n_tok)
                    || c.fract() != 0.0
                    || !(1.0..=MAX_COUNT).contains(&c)
                {
                    return Err(bad("malformed n-gram row"));
                }
                let ctx: Vec<u32> = ids[..k].iter().map(|&x| x as u32).collect();
                let stats = lm.tables[k].entry(ctx).or_default();
                let overflow = || bad("n-gram counts overflow");
                stats.total = stats.total.checked_add(c as u64).filter(|&t| t as f64 <= MAX_COUNT).ok_or_else(overflow)?;
                let w = stats.words.entry(ids[k] as u32).or_default();
                *w = w.checked_add(c as u64).ok_or_else(overflow)?;
            }
        }
        Ok(lm)
    }
}
