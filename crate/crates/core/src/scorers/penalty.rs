use super::{ScorerError, ScorerState, SequenceScorer, SharedScorer};
use crate::tokens::{Classifier, TokenId, Vocab};

/// Adds a constant `gamma <= 0` to the log-probability of every syntactic
/// token (non-terminals, rule-end non-terminals and opening brackets).
///
/// The result is deliberately not renormalized: it is a search-time bias,
/// not a distribution.
pub struct NonterminalPenalty {
    inner: SharedScorer,
    gamma: f64,
    penalized: Vec<bool>,
}

pub fn with_nonterminal_penalty(
    inner: SharedScorer,
    gamma: f64,
    classifier: &Classifier,
) -> Result<NonterminalPenalty, ScorerError> {
    if !(gamma <= 0.0) {
        return Err(ScorerError::PositivePenalty(gamma));
    }
    let penalized = inner
        .vocab()
        .tokens()
        .iter()
        .map(|t| classifier.classify(t).is_syntactic())
        .collect();
    Ok(NonterminalPenalty {
        inner,
        gamma,
        penalized,
    })
}

impl NonterminalPenalty {
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

impl SequenceScorer for NonterminalPenalty {
    fn vocab(&self) -> &Vocab {
        self.inner.vocab()
    }

    fn initial_state(&self) -> ScorerState {
        self.inner.initial_state()
    }

    fn score_next(&self, state: &ScorerState) -> Vec<f64> {
        let mut lp = self.inner.score_next(state);
        if self.gamma != 0.0 {
            for (x, &p) in lp.iter_mut().zip(&self.penalized) {
                if p {
                    *x += self.gamma;
                }
            }
        }
        lp
    }

    fn advance(&self, state: &ScorerState, token: TokenId) -> ScorerState {
        self.inner.advance(state, token)
    }
}
