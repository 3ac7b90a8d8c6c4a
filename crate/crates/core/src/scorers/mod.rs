//! Left-to-right sequence scorers `P(token | prefix)`.
//!
//! Every backend exposes a normalized next-token distribution in log space
//! over its vocabulary; `<s>` always has probability zero.

mod ensemble;
mod ngram;
mod penalty;
mod synthetic;

use std::sync::Arc;

use thiserror::Error;

pub use ensemble::{log_linear_ensemble, LogLinearEnsemble};
pub use ngram::{train_ngram, NgramModel, DEFAULT_SMOOTHING};
pub use penalty::{with_nonterminal_penalty, NonterminalPenalty};
pub use synthetic::{DeterministicScorer, SyntheticScorer, UniformScorer};

use crate::tokens::{TokenId, Vocab};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScorerError {
    #[error("cannot train on an empty corpus")]
    EmptyCorpus,
    #[error("n-gram order must be at least 1")]
    InvalidOrder,
    #[error("smoothing constant must be positive and finite, got {0}")]
    InvalidSmoothing(f64),
    #[error("token `{0}` is not in the vocabulary")]
    UnknownToken(String),
    #[error("ensemble members have different vocabularies")]
    VocabMismatch,
    #[error("non-terminal penalty must be <= 0, got {0}")]
    PositivePenalty(f64),
    #[error("ensemble weights must be finite and >= 0")]
    InvalidWeight,
    #[error("ensemble needs {expected} weights, got {got}")]
    WeightCount { expected: usize, got: usize },
    #[error("model file line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

/// Opaque per-prefix state owned by hypotheses.
#[derive(Clone, Debug, PartialEq)]
pub enum ScorerState {
    /// Token history (or the relevant suffix of it).
    Tokens(Vec<TokenId>),
    /// Recurrent hidden vector.
    Hidden(Vec<f64>),
    /// One state per ensemble member.
    Parts(Vec<ScorerState>),
}

impl ScorerState {
    pub(crate) fn tokens(&self) -> &[TokenId] {
        match self {
            ScorerState::Tokens(t) => t,
            other => panic!("scorer expected a token-history state, got {other:?}"),
        }
    }
}

pub trait SequenceScorer: Send + Sync {
    fn vocab(&self) -> &Vocab;

    fn initial_state(&self) -> ScorerState;

    /// Log-probabilities of every vocabulary id after the prefix `state` encodes.
    fn score_next(&self, state: &ScorerState) -> Vec<f64>;

    fn advance(&self, state: &ScorerState, token: TokenId) -> ScorerState;

    /// Sum of stepwise log-probabilities of `tokens` from the initial state.
    fn score_sequence(&self, tokens: &[TokenId]) -> f64 {
        let mut state = self.initial_state();
        let mut total = 0.0;
        for &t in tokens {
            total += self.score_next(&state)[t as usize];
            state = self.advance(&state, t);
        }
        total
    }
}

pub type SharedScorer = Arc<dyn SequenceScorer>;

/// Log-softmax over `logits`, leaving `<s>` at probability zero.
pub(crate) fn log_softmax(logits: &mut [f64]) {
    logits[Vocab::BOS_ID as usize] = f64::NEG_INFINITY;
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().map(|&z| (z - max).exp()).sum();
    let log_z = max + sum.ln();
    for z in logits.iter_mut() {
        *z -= log_z;
    }
}

/// Total probability mass of a log-space distribution.
pub fn probability_mass(log_probs: &[f64]) -> f64 {
    log_probs.iter().map(|lp| lp.exp()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_softmax_normalizes() {
        let mut z = vec![3.0, 1.0, -2.0, 0.5];
        log_softmax(&mut z);
        assert_eq!(z[0], f64::NEG_INFINITY);
        assert!((probability_mass(&z) - 1.0).abs() < 1e-12);
    }
}
