use std::collections::BTreeSet;

use super::AlignmentMatrix;

/// Half-open source and target spans of one extracted phrase pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PhraseSpanPair {
    pub src_start: usize,
    pub src_end: usize,
    pub tgt_start: usize,
    pub tgt_end: usize,
}

/// All phrase pairs consistent with the alignment.
///
/// A pair qualifies when no link leaves its rectangle, at least one link
/// lies inside, and both sides span at most `max_len` words. Unaligned
/// boundary words are absorbed on either side.
pub fn extract_phrases(a: &AlignmentMatrix, max_len: usize) -> Vec<PhraseSpanPair> {
    let (n, m) = (a.src_len, a.tgt_len);
    let mut src_aligned = vec![false; n];
    let mut by_tgt: Vec<Vec<usize>> = vec![Vec::new(); m];
    for &(i, j) in &a.links {
        src_aligned[i] = true;
        by_tgt[j].push(i);
    }
    let mut out = Vec::new();
    for ts in 0..m {
        let mut lo = usize::MAX;
        let mut hi = 0;
        for te in ts..m.min(ts + max_len) {
            for &i in &by_tgt[te] {
                lo = lo.min(i);
                hi = hi.max(i);
            }
            if lo == usize::MAX || hi - lo + 1 > max_len {
                continue;
            }
            // Source words in [lo, hi] must not link outside [ts, te].
            let consistent = a
                .links
                .iter()
                .all(|&(i, j)| !(lo..=hi).contains(&i) || (ts..=te).contains(&j));
            if !consistent {
                continue;
            }
            let mut ss = lo;
            loop {
                let mut se = hi;
                loop {
                    out.push(PhraseSpanPair {
                        src_start: ss,
                        src_end: se + 1,
                        tgt_start: ts,
                        tgt_end: te + 1,
                    });
                    se += 1;
                    if se >= n || src_aligned[se] || se - ss + 1 > max_len {
                        break;
                    }
                }
                if ss == 0 || src_aligned[ss - 1] || hi - (ss - 1) + 1 > max_len {
                    break;
                }
                ss -= 1;
            }
        }
    }
    out.sort();
    out
}

/// Reference implementation: tests the consistency predicate on every
/// rectangle.
pub fn extract_phrases_brute_force(a: &AlignmentMatrix, max_len: usize) -> Vec<PhraseSpanPair> {
    let mut out = BTreeSet::new();
    for ss in 0..a.src_len {
        for se in ss + 1..=a.src_len.min(ss + max_len) {
            for ts in 0..a.tgt_len {
                for te in ts + 1..=a.tgt_len.min(ts + max_len) {
                    let mut inside = 0;
                    let mut ok = true;
                    for &(i, j) in &a.links {
                        let si = (ss..se).contains(&i);
                        let tj = (ts..te).contains(&j);
                        if si && tj {
                            inside += 1;
                        } else if si || tj {
                            ok = false;
                            break;
                        }
                    }
                    if ok && inside > 0 {
                        out.insert(PhraseSpanPair {
                            src_start: ss,
                            src_end: se,
                            tgt_start: ts,
                            tgt_end: te,
                        });
                    }
                }
            }
        }
    }
    out.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(ss: usize, se: usize, ts: usize, te: usize) -> PhraseSpanPair {
        PhraseSpanPair {
            src_start: ss,
            src_end: se,
            tgt_start: ts,
            tgt_end: te,
        }
    }

    #[test]
    fn monotone_pair() {
        let a = AlignmentMatrix::new(2, 2, [(0, 0), (1, 1)]).unwrap();
        let got = extract_phrases(&a, 7);
        assert_eq!(got, vec![p(0, 1, 0, 1), p(0, 2, 0, 2), p(1, 2, 1, 2)]);
        assert_eq!(got, extract_phrases_brute_force(&a, 7));
    }

    #[test]
    fn crossing_pair() {
        let a = AlignmentMatrix::new(2, 2, [(0, 1), (1, 0)]).unwrap();
        let got = extract_phrases(&a, 7);
        assert_eq!(got, vec![p(0, 1, 1, 2), p(0, 2, 0, 2), p(1, 2, 0, 1)]);
    }

    #[test]
    fn no_links_no_phrases() {
        let a = AlignmentMatrix::new(3, 2, []).unwrap();
        assert!(extract_phrases(&a, 7).is_empty());
    }

    #[test]
    fn unaligned_words_extend_spans() {
        // source 1 unaligned, target 2 unaligned
        let a = AlignmentMatrix::new(3, 3, [(0, 0), (2, 1)]).unwrap();
        let got = extract_phrases(&a, 7);
        assert!(got.contains(&p(0, 2, 0, 1)));
        assert!(got.contains(&p(1, 3, 1, 3)));
        assert_eq!(got, extract_phrases_brute_force(&a, 7));
    }

    #[test]
    fn max_len_limits_both_sides() {
        let a = AlignmentMatrix::new(3, 3, [(0, 0), (1, 1), (2, 2)]).unwrap();
        assert!(extract_phrases(&a, 2).iter().all(|q| q.src_end - q.src_start <= 2 && q.tgt_end - q.tgt_start <= 2));
        assert_eq!(extract_phrases(&a, 2), extract_phrases_brute_force(&a, 2));
    }

    proptest! {
        #[test]
        fn matches_brute_force(
            n in 1usize..7, m in 1usize..7, max_len in 1usize..8,
            links in proptest::collection::vec((0usize..6, 0usize..6), 0..12),
        ) {
            let a = AlignmentMatrix::new(n, m, links.into_iter().filter(|&(i, j)| i < n && j < m)).unwrap();
            prop_assert_eq!(extract_phrases(&a, max_len), extract_phrases_brute_force(&a, max_len));
        }
    }
}
