use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Tree;

// (lhs, weight, rhs). The first production of each lhs is the shallow
// fallback used once the depth budget is spent.
const PRODUCTIONS: &[(&str, u32, &[&str])] = &[
    ("ROOT", 1, &["S"]),
    ("S", 6, &["NP", "VP"]),
    ("S", 2, &["NP", "VP", "PP"]),
    ("S", 1, &["S", "CC", "S"]),
    ("S", 1, &["VP"]),
    ("NP", 4, &["DT", "NN"]),
    ("NP", 2, &["DT", "JJ", "NN"]),
    ("NP", 2, &["NNS"]),
    ("NP", 2, &["PRP"]),
    ("NP", 1, &["NP", "PP"]),
    ("NP", 2, &["DT", "NNS"]),
    ("NP", 1, &["JJ", "NNS"]),
    ("VP", 2, &["VBD"]),
    ("VP", 4, &["VBD", "NP"]),
    ("VP", 1, &["VBZ", "NP", "PP"]),
    ("VP", 1, &["VBD", "ADVP"]),
    ("VP", 1, &["VBZ", "SBAR"]),
    ("VP", 1, &["MD", "VP"]),
    ("SBAR", 1, &["IN", "S"]),
    ("PP", 1, &["IN", "NP"]),
    ("ADVP", 1, &["RB"]),
];

const LEXICON: &[(&str, &[&str])] = &[
    ("DT", &["the", "a", "no", "every", "this"]),
    ("NN", &["microscope", "surface", "electron", "dog", "energy", "attention", "result"]),
    ("NNS", &["complications", "microscopes", "results", "dogs", "electrons", "models"]),
    ("JJ", &["new", "low", "long", "complementary", "syntactic"]),
    ("PRP", &["it", "they", "we"]),
    ("VBD", &["occurred", "attracted", "noticed", "improved", "produced"]),
    ("VBZ", &["shows", "gives", "suggests", "needs"]),
    ("MD", &["can", "may", "will"]),
    ("IN", &["as", "of", "on", "that", "with"]),
    ("RB", &["easily", "often", "slightly"]),
    ("CC", &["and", "but"]),
];

/// Seeded random trees from a small English-like grammar.
///
/// Labels are upper case and words lower case, so the two never collide.
#[derive(Clone, Debug)]
pub struct TreeGenerator {
    rng: ChaCha8Rng,
    max_depth: usize,
    split_prob: f64,
    marker: String,
}

impl TreeGenerator {
    pub fn new(seed: u64) -> Self {
        TreeGenerator {
            rng: ChaCha8Rng::seed_from_u64(seed),
            max_depth: 8,
            split_prob: 0.0,
            marker: crate::tokens::DEFAULT_MARKER.to_string(),
        }
    }

    /// Phrase nesting limit; deeper nodes take their shallow fallback rule.
    pub fn max_depth(mut self, depth: usize) -> Self {
        self.max_depth = depth;
        self
    }

    /// Splits each word into random marker-joined pieces with probability `prob`.
    pub fn subword_splits(mut self, prob: f64, marker: &str) -> Self {
        self.split_prob = prob;
        self.marker = marker.to_string();
        self
    }

    pub fn labels() -> Vec<&'static str> {
        let mut labels: Vec<&str> = PRODUCTIONS.iter().map(|p| p.0).collect();
        labels.extend(LEXICON.iter().map(|l| l.0));
        labels.sort_unstable();
        labels.dedup();
        labels
    }

    pub fn generate(&mut self) -> Tree {
        self.expand("ROOT", 0)
    }

    fn expand(&mut self, label: &str, depth: usize) -> Tree {
        if let Some((_, words)) = LEXICON.iter().find(|l| l.0 == label) {
            let word = *words.choose(&mut self.rng).expect("non-empty lexicon entry");
            let leaves = self.split(word);
            return Tree::Preterminal {
                tag: label.to_string(),
                leaves,
            };
        }
        let options: Vec<&(&str, u32, &[&str])> =
            PRODUCTIONS.iter().filter(|p| p.0 == label).collect();
        let rhs = if depth >= self.max_depth {
            options[0].2
        } else {
            let total: u32 = options.iter().map(|p| p.1).sum();
            let mut pick = self.rng.gen_range(0..total);
            let mut chosen = options[0].2;
            for p in &options {
                if pick < p.1 {
                    chosen = p.2;
                    break;
                }
                pick -= p.1;
            }
            chosen
        };
        Tree::Phrase {
            label: label.to_string(),
            children: rhs.iter().map(|c| self.expand(c, depth + 1)).collect(),
        }
    }

    fn split(&mut self, word: &str) -> Vec<String> {
        let chars: Vec<char> = word.chars().collect();
        if chars.len() < 2 || !self.rng.gen_bool(self.split_prob) {
            return vec![word.to_string()];
        }
        let mut cuts: Vec<usize> = (1..chars.len()).collect();
        cuts.shuffle(&mut self.rng);
        let n_cuts = self.rng.gen_range(1..=cuts.len().min(3));
        let mut cuts = cuts[..n_cuts].to_vec();
        cuts.sort_unstable();
        let mut pieces = Vec::with_capacity(n_cuts + 1);
        let mut start = 0;
        for &c in &cuts {
            pieces.push(format!("{}{}", chars[start..c].iter().collect::<String>(), self.marker));
            start = c;
        }
        pieces.push(chars[start..].iter().collect());
        pieces
    }
}
