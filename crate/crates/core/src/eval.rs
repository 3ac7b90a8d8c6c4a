//! Corpus BLEU-4 and paired bootstrap resampling.
//!
//! BLEU here is the usual corpus-level score: clipped n-gram precisions for
//! n = 1..4 are pooled over all sentences, combined by geometric mean and
//! multiplied by the brevity penalty `exp(1 - r/c)` when the hypothesis
//! length `c` is below the reference length `r`. One reference per sentence.

use std::collections::HashMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub const MAX_ORDER: usize = 4;
pub const DEFAULT_SAMPLES: usize = 1000;
pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("{hyps} hypotheses but {refs} references")]
    LengthMismatch { hyps: usize, refs: usize },
    #[error("cannot score an empty corpus")]
    EmptyCorpus,
    #[error("bootstrap needs at least 100 samples, got {0}")]
    TooFewSamples(usize),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Smoothing {
    #[default]
    None,
    /// Add one to matches and totals for n ≥ 2 (Lin and Och).
    AddOne,
}

/// N-gram statistics of one sentence pair.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SentenceStats {
    pub matches: [usize; MAX_ORDER],
    pub totals: [usize; MAX_ORDER],
    pub hyp_len: usize,
    pub ref_len: usize,
}

impl SentenceStats {
    pub fn new<S: AsRef<str>>(hyp: &[S], reference: &[S]) -> Self {
        let mut stats = SentenceStats {
            hyp_len: hyp.len(),
            ref_len: reference.len(),
            ..Default::default()
        };
        for n in 1..=MAX_ORDER {
            let ref_counts = ngram_counts(reference, n);
            for (gram, count) in ngram_counts(hyp, n) {
                stats.matches[n - 1] += count.min(ref_counts.get(&gram).copied().unwrap_or(0));
            }
            stats.totals[n - 1] = hyp.len().saturating_sub(n - 1);
        }
        stats
    }

    fn add(&mut self, other: &SentenceStats) {
        for n in 0..MAX_ORDER {
            self.matches[n] += other.matches[n];
            self.totals[n] += other.totals[n];
        }
        self.hyp_len += other.hyp_len;
        self.ref_len += other.ref_len;
    }
}

fn ngram_counts<S: AsRef<str>>(words: &[S], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut counts = HashMap::new();
    for w in words.windows(n) {
        *counts.entry(w.iter().map(AsRef::as_ref).collect()).or_insert(0) += 1;
    }
    counts
}

/// Corpus-level BLEU of pooled statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct Score {
    pub bleu: f64,
    pub precisions: [f64; MAX_ORDER],
    pub brevity_penalty: f64,
    pub hyp_len: usize,
    pub ref_len: usize,
}

impl Score {
    pub fn from_stats(total: &SentenceStats, smoothing: Smoothing) -> Score {
        let mut precisions = [0.0; MAX_ORDER];
        for n in 0..MAX_ORDER {
            let (m, t) = (total.matches[n] as f64, total.totals[n] as f64);
            precisions[n] = match smoothing {
                Smoothing::AddOne if n > 0 => (m + 1.0) / (t + 1.0),
                _ if t == 0.0 => 0.0,
                _ => m / t,
            };
        }
        let (c, r) = (total.hyp_len as f64, total.ref_len as f64);
        let brevity_penalty = if c == 0.0 {
            0.0
        } else if c < r {
            (1.0 - r / c).exp()
        } else {
            1.0
        };
        let bleu = if precisions.contains(&0.0) {
            0.0
        } else {
            let log_mean = precisions.iter().map(|p| p.ln()).sum::<f64>() / MAX_ORDER as f64;
            100.0 * brevity_penalty * log_mean.exp()
        };
        Score {
            bleu,
            precisions,
            brevity_penalty,
            hyp_len: total.hyp_len,
            ref_len: total.ref_len,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub score: Score,
    pub sentences: Vec<SentenceStats>,
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = &self.score;
        let p: Vec<String> = s.precisions.iter().map(|p| format!("{:.1}", 100.0 * p)).collect();
        writeln!(
            f,
            "BLEU = {:.2}, {} (BP={:.3}, ratio={:.3}, hyp_len={}, ref_len={})",
            s.bleu,
            p.join("/"),
            s.brevity_penalty,
            s.hyp_len as f64 / s.ref_len.max(1) as f64,
            s.hyp_len,
            s.ref_len
        )?;
        writeln!(f, "bleu={:.4}", s.bleu)?;
        for (n, p) in s.precisions.iter().enumerate() {
            writeln!(f, "precision_{}={:.6}", n + 1, p)?;
        }
        writeln!(f, "brevity_penalty={:.6}", s.brevity_penalty)?;
        writeln!(f, "hyp_len={}", s.hyp_len)?;
        writeln!(f, "ref_len={}", s.ref_len)?;
        write!(f, "sentences={}", self.sentences.len())
    }
}

fn check<A, B>(hyps: &[A], refs: &[B]) -> Result<(), EvalError> {
    if hyps.len() != refs.len() {
        return Err(EvalError::LengthMismatch {
            hyps: hyps.len(),
            refs: refs.len(),
        });
    }
    if hyps.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }
    Ok(())
}

fn pooled<'a>(stats: impl IntoIterator<Item = &'a SentenceStats>) -> SentenceStats {
    let mut total = SentenceStats::default();
    for s in stats {
        total.add(s);
    }
    total
}

/// Corpus BLEU of tokenized hypotheses against one reference each.
pub fn bleu<L: AsRef<[String]>>(hyps: &[L], refs: &[L], smoothing: Smoothing) -> Result<EvalReport, EvalError> {
    check(hyps, refs)?;
    let sentences: Vec<SentenceStats> = hyps
        .iter()
        .zip(refs)
        .map(|(h, r)| SentenceStats::new(h.as_ref(), r.as_ref()))
        .collect();
    Ok(EvalReport {
        score: Score::from_stats(&pooled(&sentences), smoothing),
        sentences,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BootstrapReport {
    pub bleu_a: f64,
    pub bleu_b: f64,
    /// Fraction of resampled corpora on which B does not beat A.
    pub p_value: f64,
    pub samples: usize,
}

impl BootstrapReport {
    pub fn significant(&self) -> bool {
        self.p_value < SIGNIFICANCE_LEVEL
    }
}

impl fmt::Display for BootstrapReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "B vs A: {:.2} vs {:.2}, p = {:.4}{}",
            self.bleu_b,
            self.bleu_a,
            self.p_value,
            if self.significant() { " (significant)" } else { "" }
        )?;
        writeln!(f, "bleu_a={:.4}", self.bleu_a)?;
        writeln!(f, "bleu_b={:.4}", self.bleu_b)?;
        writeln!(f, "p_value={:.6}", self.p_value)?;
        write!(f, "samples={}", self.samples)
    }
}

/// Paired bootstrap test of "B is better than A". Each sample draws
/// `n` sentence indices with replacement (`gen_range(0..n)` from a ChaCha8
/// stream seeded with `seed`) and scores both systems on them.
pub fn paired_bootstrap<L: AsRef<[String]>>(
    hyp_a: &[L],
    hyp_b: &[L],
    refs: &[L],
    samples: usize,
    seed: u64,
    smoothing: Smoothing,
) -> Result<BootstrapReport, EvalError> {
    check(hyp_a, refs)?;
    check(hyp_b, refs)?;
    if samples < 100 {
        return Err(EvalError::TooFewSamples(samples));
    }
    let a = bleu(hyp_a, refs, smoothing)?;
    let b = bleu(hyp_b, refs, smoothing)?;
    let n = refs.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut not_better = 0;
    for _ in 0..samples {
        let idx: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
        let sa = Score::from_stats(&pooled(idx.iter().map(|&i| &a.sentences[i])), smoothing);
        let sb = Score::from_stats(&pooled(idx.iter().map(|&i| &b.sentences[i])), smoothing);
        if sb.bleu <= sa.bleu {
            not_better += 1;
        }
    }
    Ok(BootstrapReport {
        bleu_a: a.score.bleu,
        bleu_b: b.score.bleu,
        p_value: not_better as f64 / samples as f64,
        samples,
    })
}

/// Whitespace tokenization of one line.
pub fn words(line: &str) -> Vec<String> {
    line.split_whitespace().map(str::to_string).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(lines: &[&str]) -> Vec<Vec<String>> {
        lines.iter().map(|l| words(l)).collect()
    }

    #[test]
    fn identical_is_100() {
        let x = corpus(&["the cat sat on the mat", "a dog barked loudly at night"]);
        assert_eq!(bleu(&x, &x, Smoothing::None).unwrap().score.bleu, 100.0);
    }

    #[test]
    fn clipped_precision_example() {
        let h = corpus(&["the the the"]);
        let r = corpus(&["the cat"]);
        let rep = bleu(&h, &r, Smoothing::None).unwrap();
        // "the" appears once in the reference, so 1 of 3 unigrams match
        assert_eq!(rep.sentences[0].matches, [1, 0, 0, 0]);
        assert_eq!(rep.sentences[0].totals, [3, 2, 1, 0]);
        assert_eq!(rep.score.bleu, 0.0);
        // smoothed: (1/3 · 1/3 · 1/2 · 1/1)^(1/4), no brevity penalty
        let smoothed = bleu(&h, &r, Smoothing::AddOne).unwrap().score.bleu;
        assert!((smoothed - 100.0 * (1.0f64 / 18.0).powf(0.25)).abs() < 1e-12);
        assert!((smoothed - 48.5492).abs() < 1e-4);
    }

    #[test]
    fn brevity_penalty() {
        let h = corpus(&["a b c d"]);
        let r = corpus(&["a b c d e f g h"]);
        let s = bleu(&h, &r, Smoothing::None).unwrap().score;
        assert!((s.brevity_penalty - (-1f64).exp()).abs() < 1e-15);
        assert!((s.bleu - 100.0 * (-1f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn errors() {
        let x = corpus(&["a"]);
        let y = corpus(&["a", "b"]);
        assert_eq!(bleu(&x, &y, Smoothing::None), Err(EvalError::LengthMismatch { hyps: 1, refs: 2 }));
        let empty: Vec<Vec<String>> = vec![];
        assert_eq!(bleu(&empty, &empty, Smoothing::None), Err(EvalError::EmptyCorpus));
        assert_eq!(
            paired_bootstrap(&x, &x, &x, 10, 0, Smoothing::None),
            Err(EvalError::TooFewSamples(10))
        );
    }

    #[test]
    fn identical_systems_are_never_significant() {
        let r = corpus(&["a b c d e", "b c d e f", "x y z w v"]);
        let h = corpus(&["a b c d x", "b c d e f", "x y z"]);
        let rep = paired_bootstrap(&h, &h, &r, 200, 3, Smoothing::None).unwrap();
        assert_eq!(rep.p_value, 1.0);
        assert!(!rep.significant());
    }

    #[test]
    fn dominant_system_is_significant() {
        let r: Vec<Vec<String>> = (0..30).map(|i| words(&format!("w{i} a b c d e f g"))).collect();
        let bad: Vec<Vec<String>> = (0..30).map(|i| words(&format!("w{i} a b x d e y g"))).collect();
        let rep = paired_bootstrap(&bad, &r, &r, 1000, 1, Smoothing::None).unwrap();
        assert_eq!(rep.p_value, 0.0);
        assert!(rep.significant());
    }
}
