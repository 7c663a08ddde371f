use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};

/// Word links `(source index, target index)` for one sentence pair.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AlignmentMatrix {
    pub src_len: usize,
    pub tgt_len: usize,
    pub links: BTreeSet<(usize, usize)>,
}

impl AlignmentMatrix {
    pub fn new(src_len: usize, tgt_len: usize, links: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let links: BTreeSet<_> = links.into_iter().collect();
        if let Some(&(i, j)) = links.iter().find(|&&(i, j)| i >= src_len || j >= tgt_len) {
            return Err(Error::InvalidArgument(format!(
                "link {i}-{j} outside a {src_len}x{tgt_len} alignment"
            )));
        }
        Ok(AlignmentMatrix { src_len, tgt_len, links })
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.links.contains(&(i, j))
    }

    pub fn intersection(&self, other: &Self) -> BTreeSet<(usize, usize)> {
        self.links.intersection(&other.links).copied().collect()
    }

    pub fn union(&self, other: &Self) -> BTreeSet<(usize, usize)> {
        self.links.union(&other.links).copied().collect()
    }
}

/// Pharaoh format: space-separated `i-j` pairs, source index first.
pub fn format_pharaoh(a: &AlignmentMatrix) -> String {
    a.links
        .iter()
        .map(|(i, j)| format!("{i}-{j}"))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn parse_pharaoh(line: &str, src_len: usize, tgt_len: usize) -> Result<AlignmentMatrix> {
    let mut links = Vec::new();
    for tok in line.split_whitespace() {
        let (a, b) = tok
            .split_once('-')
            .ok_or_else(|| Error::Format(format!("alignment link {tok:?} is not i-j")))?;
        let i = a
            .parse()
            .map_err(|_| Error::Format(format!("bad source index in {tok:?}")))?;
        let j = b
            .parse()
            .map_err(|_| Error::Format(format!("bad target index in {tok:?}")))?;
        links.push((i, j));
    }
    AlignmentMatrix::new(src_len, tgt_len, links).map_err(|e| Error::Format(e.to_string()))
}

/// Which side generates which under Model 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Target words are generated from source words: `t(tgt | src)`.
    SourceToTarget,
    /// Source words are generated from target words: `t(src | tgt)`.
    TargetToSource,
}

const NULL: u32 = 0;

/// IBM Model 1 lexical table with an empty (NULL) word on the conditioning
/// side.
#[derive(Debug, Clone)]
pub struct Ibm1Model {
    direction: Direction,
    cond_ids: HashMap<String, u32>,
    gen_ids: HashMap<String, u32>,
    /// `trans[cond][gen]`, conditioning id 0 is NULL.
    trans: Vec<HashMap<u32, f64>>,
}

fn intern(ids: &mut HashMap<String, u32>, tok: &str, offset: u32) -> u32 {
    let next = ids.len() as u32 + offset;
    *ids.entry(tok.to_string()).or_insert(next)
}

impl Ibm1Model {
    pub fn train(pairs: &[(Vec<String>, Vec<String>)], iterations: usize, direction: Direction) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::Config("cannot align an empty corpus".into()));
        }
        if iterations == 0 {
            return Err(Error::Config("alignment needs at least one EM iteration".into()));
        }
        let mut cond_ids = HashMap::new();
        let mut gen_ids = HashMap::new();
        let mut sents: Vec<(Vec<u32>, Vec<u32>)> = Vec::with_capacity(pairs.len());
        for (s, t) in pairs {
            let (cond, gen) = match direction {
                Direction::SourceToTarget => (s, t),
                Direction::TargetToSource => (t, s),
            };
            let mut c: Vec<u32> = vec![NULL];
            c.extend(cond.iter().map(|w| intern(&mut cond_ids, w, 1)));
            let g: Vec<u32> = gen.iter().map(|w| intern(&mut gen_ids, w, 0)).collect();
            sents.push((c, g));
        }

        // Uniform start over co-occurring pairs.
        let uniform = 1.0 / gen_ids.len().max(1) as f64;
        let mut trans: Vec<HashMap<u32, f64>> = vec![HashMap::new(); cond_ids.len() + 1];
        for (c, g) in &sents {
            for &ci in c {
                for &gj in g {
                    trans[ci as usize].insert(gj, uniform);
                }
            }
        }

        for _ in 0..iterations {
            let mut counts: Vec<HashMap<u32, f64>> = vec![HashMap::new(); trans.len()];
            let mut totals = vec![0.0; trans.len()];
            for (c, g) in &sents {
                for &gj in g {
                    let z: f64 = c.iter().map(|&ci| trans[ci as usize][&gj]).sum();
                    for &ci in c {
                        let p = trans[ci as usize][&gj] / z;
                        *counts[ci as usize].entry(gj).or_default() += p;
                        totals[ci as usize] += p;
                    }
                }
            }
            for (ci, row) in counts.into_iter().enumerate() {
                let tot = totals[ci];
                for (gj, v) in row {
                    trans[ci].insert(gj, v / tot);
                }
            }
        }
        Ok(Ibm1Model {
            direction,
            cond_ids,
            gen_ids,
            trans,
        })
    }

    /// `t(gen | cond)`, zero for unseen words or pairs.
    pub fn prob(&self, cond: Option<&str>, gen: &str) -> f64 {
        let ci = match cond {
            None => Some(NULL),
            Some(w) => self.cond_ids.get(w).copied(),
        };
        match (ci, self.gen_ids.get(gen)) {
            (Some(ci), Some(gj)) => self.trans[ci as usize].get(gj).copied().unwrap_or(0.0),
            _ => 0.0,
        }
    }

    /// Best link per generated word; NULL wins only when strictly better.
    pub fn viterbi(&self, src: &[String], tgt: &[String]) -> AlignmentMatrix {
        let (cond, gen) = match self.direction {
            Direction::SourceToTarget => (src, tgt),
            Direction::TargetToSource => (tgt, src),
        };
        let mut links = BTreeSet::new();
        for (gj, g) in gen.iter().enumerate() {
            let mut best: Option<(usize, f64)> = None;
            for (ci, c) in cond.iter().enumerate() {
                let p = self.prob(Some(c), g);
                if p > 0.0 && best.map_or(true, |(_, bp)| p > bp) {
                    best = Some((ci, p));
                }
            }
            let null_p = self.prob(None, g);
            if let Some((ci, p)) = best {
                if p >= null_p {
                    links.insert(match self.direction {
                        Direction::SourceToTarget => (ci, gj),
                        Direction::TargetToSource => (gj, ci),
                    });
                }
            }
        }
        AlignmentMatrix {
            src_len: src.len(),
            tgt_len: tgt.len(),
            links,
        }
    }
}

const NEIGHBORS: [(isize, isize); 8] = [(-1, 0), (0, -1), (1, 0), (0, 1), (-1, -1), (-1, 1), (1, -1), (1, 1)];

/// grow-diag-final symmetrization of two directional alignments.
///
/// Starts from the intersection, repeatedly adds union links adjacent
/// (including diagonally) to a current link when either of their words is
/// still unaligned, then adds remaining union links touching an unaligned
/// word, first from `a` then from `b`.
pub fn grow_diag_final(a: &AlignmentMatrix, b: &AlignmentMatrix) -> AlignmentMatrix {
    let (n, m) = (a.src_len, a.tgt_len);
    let union = a.union(b);
    let mut links = a.intersection(b);
    let mut src_aligned = vec![false; n];
    let mut tgt_aligned = vec![false; m];
    for &(i, j) in &links {
        src_aligned[i] = true;
        tgt_aligned[j] = true;
    }

    loop {
        let mut added = false;
        for j in 0..m {
            for i in 0..n {
                if !links.contains(&(i, j)) {
                    continue;
                }
                for (di, dj) in NEIGHBORS {
                    let (ni, nj) = (i as isize + di, j as isize + dj);
                    if ni < 0 || nj < 0 || ni >= n as isize || nj >= m as isize {
                        continue;
                    }
                    let (ni, nj) = (ni as usize, nj as usize);
                    if (!src_aligned[ni] || !tgt_aligned[nj]) && union.contains(&(ni, nj)) && links.insert((ni, nj)) {
                        src_aligned[ni] = true;
                        tgt_aligned[nj] = true;
                        added = true;
                    }
                }
            }
        }
        if !added {
            break;
        }
    }

    for dir in [a, b] {
        for j in 0..m {
            for i in 0..n {
                if (!src_aligned[i] || !tgt_aligned[j]) && dir.contains(i, j) {
                    links.insert((i, j));
                    src_aligned[i] = true;
                    tgt_aligned[j] = true;
                }
            }
        }
    }
    AlignmentMatrix {
        src_len: n,
        tgt_len: m,
        links,
    }
}

/// Trains Model 1 in both directions and symmetrizes every pair.
pub fn ibm1_align(pairs: &[(Vec<String>, Vec<String>)], iterations: usize) -> Result<Vec<AlignmentMatrix>> {
    let fwd = Ibm1Model::train(pairs, iterations, Direction::SourceToTarget)?;
    let bwd = Ibm1Model::train(pairs, iterations, Direction::TargetToSource)?;
    Ok(pairs
        .iter()
        .map(|(s, t)| grow_diag_final(&fwd.viterbi(s, t), &bwd.viterbi(s, t)))
        .collect())
}
