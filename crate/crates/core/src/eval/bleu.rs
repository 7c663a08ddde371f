use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BleuReport {
    pub bleu: f64,
    pub precisions: Vec<f64>,
    pub matches: Vec<u64>,
    pub totals: Vec<u64>,
    pub brevity_penalty: f64,
    pub hyp_len: usize,
    pub ref_len: usize,
}

impl BleuReport {
    pub fn summary(&self) -> String {
        let p: Vec<String> = self.precisions.iter().map(|p| format!("{:.1}", 100.0 * p)).collect();
        format!(
            "BLEU = {:.2}, {} (BP={:.3}, ratio={:.3}, hyp_len={}, ref_len={})",
            100.0 * self.bleu,
            p.join("/"),
            self.brevity_penalty,
            self.hyp_len as f64 / self.ref_len.max(1) as f64,
            self.hyp_len,
            self.ref_len
        )
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], u64> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for g in tokens.windows(n) {
            *counts.entry(g).or_insert(0) += 1;
        }
    }
    counts
}

fn fold(tokens: &[String], lower: bool) -> Vec<String> {
    if lower {
        tokens.iter().map(|t| t.to_lowercase()).collect()
    } else {
        tokens.to_vec()
    }
}

/// Corpus BLEU with multi-reference clipping and the closest-reference
/// length rule (ties go to the shorter reference).
pub fn bleu<H, R>(hypotheses: &[H], references: &[R], max_n: usize, case_insensitive: bool) -> Result<BleuReport>
where
    H: AsRef<[String]>,
    R: AsRef<[Vec<String>]>,
{
    if hypotheses.is_empty() {
        return Err(Error::InvalidArgument("no hypotheses to score".into()));
    }
    if hypotheses.len() != references.len() {
        return Err(Error::InvalidArgument(format!(
            "{} hypotheses but {} reference sets",
            hypotheses.len(),
            references.len()
        )));
    }
    if max_n == 0 {
        return Err(Error::InvalidArgument("max_n must be positive".into()));
    }
    let mut matches = vec![0u64; max_n];
    let mut totals = vec![0u64; max_n];
    let (mut hyp_len, mut ref_len) = (0usize, 0usize);
    for (h, rs) in hypotheses.iter().zip(references) {
        let rs = rs.as_ref();
        if rs.is_empty() {
            return Err(Error::InvalidArgument("hypothesis without references".into()));
        }
        let h = fold(h.as_ref(), case_insensitive);
        let rs: Vec<Vec<String>> = rs.iter().map(|r| fold(r, case_insensitive)).collect();
        hyp_len += h.len();
        ref_len += rs
            .iter()
            .map(Vec::len)
            .min_by_key(|&r| (r.abs_diff(h.len()), r))
            .expect("non-empty reference set");
        for n in 1..=max_n {
            let mut max_ref: HashMap<&[String], u64> = HashMap::new();
            for r in &rs {
                for (g, c) in ngram_counts(r, n) {
                    let e = max_ref.entry(g).or_insert(0);
                    *e = (*e).max(c);
                }
            }
            for (g, c) in ngram_counts(&h, n) {
                matches[n - 1] += c.min(max_ref.get(g).copied().unwrap_or(0));
                totals[n - 1] += c;
            }
        }
    }
    let precisions: Vec<f64> = matches
        .iter()
        .zip(&totals)
        .map(|(&m, &t)| if t == 0 { 0.0 } else { m as f64 / t as f64 })
        .collect();
    let brevity_penalty = if hyp_len == 0 {
        0.0
    } else if hyp_len > ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    };
    let bleu = if precisions.iter().any(|&p| p == 0.0) {
        0.0
    } else {
        brevity_penalty * (precisions.iter().map(|p| p.ln()).sum::<f64>() / max_n as f64).exp()
    };
    Ok(BleuReport { bleu, precisions, matches, totals, brevity_penalty, hyp_len, ref_len })
}
