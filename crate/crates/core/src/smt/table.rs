use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const DEFAULT_MAX_PHRASE_LEN: usize = 7;

#[derive(Debug, Clone, PartialEq)]
pub struct PhraseTranslation {
    pub target: Vec<String>,
    pub logp_tgt_given_src: f64,
    pub logp_src_given_tgt: f64,
    pub count: u64,
}

/// Source phrase -> candidate target phrases, relative-frequency scored.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PhraseTable {
    entries: HashMap<Vec<String>, Vec<PhraseTranslation>>,
}

impl PhraseTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of source phrases.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn num_pairs(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    pub fn lookup<S: AsRef<str>>(&self, source: &[S]) -> &[PhraseTranslation] {
        let key: Vec<String> = source.iter().map(|s| s.as_ref().to_string()).collect();
        self.entries.get(&key).map_or(&[], |v| v.as_slice())
    }

    pub fn insert(&mut self, source: Vec<String>, translation: PhraseTranslation) {
        let list = self.entries.entry(source).or_default();
        match list.iter_mut().find(|t| t.target == translation.target) {
            Some(t) => *t = translation,
            None => list.push(translation),
        }
        list.sort_by(|a, b| a.target.cmp(&b.target));
    }

    /// Adds a dictionary entry with translation probability 1 both ways.
    pub fn add_static_entry(&mut self, source: Vec<String>, target: Vec<String>) {
        self.insert(
            source,
            PhraseTranslation {
                target,
                logp_tgt_given_src: 0.0,
                logp_src_given_tgt: 0.0,
                count: 0,
            },
        );
    }

    /// Reads `src ||| tgt` dictionary lines into static entries; returns how
    /// many were added.
    pub fn add_static_dictionary(&mut self, text: &str) -> Result<usize> {
        let mut n = 0;
        for (ln, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (src, tgt) = line
                .split_once("|||")
                .ok_or_else(|| Error::Format(format!("dictionary line {}: expected src ||| tgt", ln + 1)))?;
            let src: Vec<String> = src.split_whitespace().map(String::from).collect();
            let tgt: Vec<String> = tgt.split_whitespace().map(String::from).collect();
            if src.is_empty() || tgt.is_empty() || tgt.iter().any(|t| t.contains("|||")) {
                return Err(Error::Format(format!("dictionary line {}: empty or malformed phrase", ln + 1)));
            }
            self.add_static_entry(src, tgt);
            n += 1;
        }
        Ok(n)
    }

    /// Entries sorted by source phrase, then target phrase.
    pub fn iter_sorted(&self) -> Vec<(&Vec<String>, &PhraseTranslation)> {
        let mut keys: Vec<&Vec<String>> = self.entries.keys().collect();
        keys.sort();
        keys.into_iter()
            .flat_map(|k| self.entries[k].iter().map(move |t| (k, t)))
            .collect()
    }

    /// `src ||| tgt ||| logp_t_given_s logp_s_given_t count`, one per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (src, t) in self.iter_sorted() {
            s.push_str(&format!(
                "{} ||| {} ||| {:?} {:?} {}\n",
                src.join(" "),
                t.target.join(" "),
                t.logp_tgt_given_src,
                t.logp_src_given_tgt,
                t.count
            ));
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut table = PhraseTable::new();
        for (ln, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let err = |msg: &str| Error::Format(format!("phrase table line {}: {msg}", ln + 1));
            let parts: Vec<&str> = line.split("|||").collect();
            if parts.len() != 3 {
                return Err(err("expected three |||-separated fields"));
            }
            let src: Vec<String> = parts[0].split_whitespace().map(String::from).collect();
            let tgt: Vec<String> = parts[1].split_whitespace().map(String::from).collect();
            if src.is_empty() || tgt.is_empty() {
                return Err(err("empty phrase"));
            }
            let nums: Vec<&str> = parts[2].split_whitespace().collect();
            if nums.len() != 3 {
                return Err(err("expected logp_t_given_s logp_s_given_t count"));
            }
            let lp_ts: f64 = nums[0].parse().map_err(|_| err("bad log-probability"))?;
            let lp_st: f64 = nums[1].parse().map_err(|_| err("bad log-probability"))?;
            if !(lp_ts.is_finite() && lp_st.is_finite() && lp_ts <= 0.0 && lp_st <= 0.0) {
                return Err(err("log-probabilities must be finite and <= 0"));
            }
            let count: u64 = nums[2].parse().map_err(|_| err("bad count"))?;
            table.insert(
                src,
                PhraseTranslation {
                    target: tgt,
                    logp_tgt_given_src: lp_ts,
                    logp_src_given_tgt: lp_st,
                    count,
                },
            );
        }
        Ok(table)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path.as_ref(), self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
        Self::parse(&text)
    }
}

/// Relative-frequency estimates over every extracted occurrence.
pub fn build_phrase_table<I>(pairs: I) -> PhraseTable
where
    I: IntoIterator<Item = (Vec<String>, Vec<String>)>,
{
    let mut joint: HashMap<(Vec<String>, Vec<String>), u64> = HashMap::new();
    let mut src_tot: HashMap<Vec<String>, u64> = HashMap::new();
    let mut tgt_tot: HashMap<Vec<String>, u64> = HashMap::new();
    for (s, t) in pairs {
        *src_tot.entry(s.clone()).or_default() += 1;
        *tgt_tot.entry(t.clone()).or_default() += 1;
        *joint.entry((s, t)).or_default() += 1;
    }
    let mut table = PhraseTable::new();
    for ((s, t), c) in joint {
        let lp_ts = (c as f64 / src_tot[&s] as f64).ln();
        let lp_st = (c as f64 / tgt_tot[&t] as f64).ln();
        table.entries.entry(s).or_default().push(PhraseTranslation {
            target: t,
            logp_tgt_given_src: lp_ts,
            logp_src_given_tgt: lp_st,
            count: c,
        });
    }
    for list in table.entries.values_mut() {
        list.sort_by(|a, b| a.target.cmp(&b.target));
    }
    table
}
