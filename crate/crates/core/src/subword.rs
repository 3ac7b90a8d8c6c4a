//! Byte-pair-encoding merges learned on plain text and applied to words and
//! tree leaves.
//!
//! Merges never cross word boundaries. Non-final pieces of a word carry a
//! continuation marker suffix (`low@@ e@@ s@@ t`).

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use crate::tokens::{Representation, TokenSeq, DEFAULT_MARKER, RULE_END};
use crate::treebank::Tree;

const HEADER: &str = "#bpe v1";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BpeError {
    #[error("cannot learn merges from an empty corpus")]
    EmptyCorpus,
    #[error("word `{0}` contains the reserved `</R>` marker")]
    ReservedMarker(String),
    #[error("token {index} carries a continuation marker but ends the sentence")]
    DanglingMarker { index: usize },
    #[error("merge file line {line}: {reason}")]
    Malformed { line: usize, reason: &'static str },
    #[error("continuation marker must be non-empty")]
    EmptyMarker,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BpeModel {
    merges: Vec<(String, String)>,
    marker: String,
    ranks: HashMap<(String, String), usize>,
}

impl BpeModel {
    pub fn new(merges: Vec<(String, String)>, marker: &str) -> Result<Self, BpeError> {
        if marker.is_empty() {
            return Err(BpeError::EmptyMarker);
        }
        let ranks = merges
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect();
        Ok(BpeModel {
            merges,
            marker: marker.to_string(),
            ranks,
        })
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn marker(&self) -> &str {
        &self.marker
    }

    /// Splits one word into pieces, applying merges by learned rank.
    pub fn segment(&self, word: &str) -> Vec<String> {
        let mut symbols: Vec<String> = word.chars().map(String::from).collect();
        loop {
            let best = symbols
                .windows(2)
                .filter_map(|w| self.ranks.get(&(w[0].clone(), w[1].clone())))
                .min()
                .copied();
            let Some(rank) = best else { break };
            let (left, right) = &self.merges[rank];
            let mut merged = Vec::with_capacity(symbols.len());
            let mut i = 0;
            while i < symbols.len() {
                if i + 1 < symbols.len() && &symbols[i] == left && &symbols[i + 1] == right {
                    merged.push(format!("{left}{right}"));
                    i += 2;
                } else {
                    merged.push(std::mem::take(&mut symbols[i]));
                    i += 1;
                }
            }
            symbols = merged;
        }
        let n = symbols.len();
        for s in &mut symbols[..n.saturating_sub(1)] {
            s.push_str(&self.marker);
        }
        symbols
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{HEADER} marker={}\n", self.marker);
        for (l, r) in &self.merges {
            out.push_str(l);
            out.push(' ');
            out.push_str(r);
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, BpeError> {
        let mut lines = text.lines();
        let header = lines.next().ok_or(BpeError::Malformed {
            line: 1,
            reason: "missing header",
        })?;
        let marker = header
            .strip_prefix(HEADER)
            .and_then(|rest| rest.trim().strip_prefix("marker="))
            .ok_or(BpeError::Malformed {
                line: 1,
                reason: "expected `#bpe v1 marker=...`",
            })?;
        let mut merges = Vec::new();
        for (n, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split(' ');
            match (parts.next(), parts.next(), parts.next()) {
                (Some(l), Some(r), None) if !l.is_empty() && !r.is_empty() => {
                    merges.push((l.to_string(), r.to_string()))
                }
                _ => {
                    return Err(BpeError::Malformed {
                        line: n + 2,
                        reason: "expected `left right`",
                    })
                }
            }
        }
        BpeModel::new(merges, marker)
    }
}

/// Learns up to `num_merges` merges from whitespace-tokenized lines.
///
/// Each step merges the most frequent adjacent symbol pair inside words;
/// ties go to the lexicographically smallest `(left, right)`. Stops early
/// once every word is a single symbol.
pub fn learn_bpe<L: AsRef<str>>(
    corpus: &[L],
    num_merges: usize,
    marker: &str,
) -> Result<BpeModel, BpeError> {
    let mut freq: BTreeMap<&str, i64> = BTreeMap::new();
    for line in corpus {
        for w in line.as_ref().split_whitespace() {
            if w.contains(RULE_END) {
                return Err(BpeError::ReservedMarker(w.to_string()));
            }
            *freq.entry(w).or_default() += 1;
        }
    }
    if freq.is_empty() {
        return Err(BpeError::EmptyCorpus);
    }
    let mut words: Vec<(Vec<String>, i64)> = freq
        .into_iter()
        .map(|(w, c)| (w.chars().map(String::from).collect(), c))
        .collect();

    type Pair = (String, String);
    let mut counts: HashMap<Pair, i64> = HashMap::new();
    let mut where_: HashMap<Pair, BTreeSet<usize>> = HashMap::new();
    let mut queue: BTreeSet<(Reverse<i64>, String, String)> = BTreeSet::new();

    fn pairs(symbols: &[String]) -> impl Iterator<Item = (String, String)> + '_ {
        symbols.windows(2).map(|w| (w[0].clone(), w[1].clone()))
    }
    let bump = |counts: &mut HashMap<Pair, i64>,
                queue: &mut BTreeSet<(Reverse<i64>, String, String)>,
                pair: Pair,
                delta: i64| {
        let c = counts.entry(pair.clone()).or_default();
        if *c > 0 {
            queue.remove(&(Reverse(*c), pair.0.clone(), pair.1.clone()));
        }
        *c += delta;
        if *c > 0 {
            queue.insert((Reverse(*c), pair.0, pair.1));
        }
    };

    for (i, (symbols, c)) in words.iter().enumerate() {
        for p in pairs(symbols) {
            where_.entry(p.clone()).or_default().insert(i);
            bump(&mut counts, &mut queue, p, *c);
        }
    }

    let mut merges = Vec::with_capacity(num_merges);
    while merges.len() < num_merges {
        let Some((_, left, right)) = queue.first().cloned() else {
            break;
        };
        let joined = format!("{left}{right}");
        let affected = where_.remove(&(left.clone(), right.clone())).unwrap_or_default();
        for i in affected {
            let (symbols, c) = &mut words[i];
            for p in pairs(symbols) {
                bump(&mut counts, &mut queue, p, -*c);
            }
            let mut merged = Vec::with_capacity(symbols.len());
            let mut k = 0;
            while k < symbols.len() {
                if k + 1 < symbols.len() && symbols[k] == left && symbols[k + 1] == right {
                    merged.push(joined.clone());
                    k += 2;
                } else {
                    merged.push(std::mem::take(&mut symbols[k]));
                    k += 1;
                }
            }
            *symbols = merged;
            for p in pairs(symbols) {
                where_.entry(p.clone()).or_default().insert(i);
                bump(&mut counts, &mut queue, p, *c);
            }
        }
        merges.push((left, right));
    }
    BpeModel::new(merges, marker)
}

/// Default-marker convenience wrapper around [`learn_bpe`].
pub fn learn_bpe_default<L: AsRef<str>>(corpus: &[L], num_merges: usize) -> Result<BpeModel, BpeError> {
    learn_bpe(corpus, num_merges, DEFAULT_MARKER)
}

/// Segments every word of a plain-text sequence.
pub fn apply_bpe(model: &BpeModel, seq: &TokenSeq) -> TokenSeq {
    TokenSeq::new(
        Representation::PlainText,
        seq.tokens.iter().flat_map(|w| model.segment(w)).collect(),
    )
}

/// Joins marker-carrying pieces with their successors.
pub fn revert_bpe(seq: &TokenSeq, marker: &str) -> Result<TokenSeq, BpeError> {
    if marker.is_empty() {
        return Err(BpeError::EmptyMarker);
    }
    let mut out = Vec::new();
    let mut pending = String::new();
    for tok in &seq.tokens {
        match tok.strip_suffix(marker) {
            Some(stem) if !stem.is_empty() => pending.push_str(stem),
            _ => {
                pending.push_str(tok);
                out.push(std::mem::take(&mut pending));
            }
        }
    }
    if !pending.is_empty() {
        return Err(BpeError::DanglingMarker {
            index: seq.tokens.len() - 1,
        });
    }
    Ok(TokenSeq::new(Representation::PlainText, out))
}

/// Replaces each preterminal's word by its pieces.
pub fn subword_tree(model: &BpeModel, tree: &Tree) -> Tree {
    tree.map_leaves(&mut |leaves| leaves.iter().flat_map(|w| model.segment(w)).collect())
}
