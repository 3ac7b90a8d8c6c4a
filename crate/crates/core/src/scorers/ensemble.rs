use super::{ScorerError, ScorerState, SequenceScorer, SharedScorer};
use crate::tokens::{TokenId, Vocab};

/// Weighted sum of member log-probabilities over one shared vocabulary.
/// Not renormalized.
pub struct LogLinearEnsemble {
    members: Vec<SharedScorer>,
    weights: Vec<f64>,
}

/// `weights` defaults to 1 for every member.
pub fn log_linear_ensemble(
    members: Vec<SharedScorer>,
    weights: Option<Vec<f64>>,
) -> Result<LogLinearEnsemble, ScorerError> {
    if members.is_empty() {
        return Err(ScorerError::WeightCount {
            expected: 1,
            got: 0,
        });
    }
    let weights = weights.unwrap_or_else(|| vec![1.0; members.len()]);
    if weights.len() != members.len() {
        return Err(ScorerError::WeightCount {
            expected: members.len(),
            got: weights.len(),
        });
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(ScorerError::InvalidWeight);
    }
    let first = members[0].vocab();
    if members.iter().any(|m| m.vocab() != first) {
        return Err(ScorerError::VocabMismatch);
    }
    Ok(LogLinearEnsemble { members, weights })
}

impl LogLinearEnsemble {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

impl SequenceScorer for LogLinearEnsemble {
    fn vocab(&self) -> &Vocab {
        self.members[0].vocab()
    }

    fn initial_state(&self) -> ScorerState {
        ScorerState::Parts(self.members.iter().map(|m| m.initial_state()).collect())
    }

    fn score_next(&self, state: &ScorerState) -> Vec<f64> {
        let ScorerState::Parts(parts) = state else {
            panic!("ensemble expects a per-member state");
        };
        let mut total = vec![0.0; self.vocab().len()];
        for ((m, w), s) in self.members.iter().zip(&self.weights).zip(parts) {
            if *w == 0.0 {
                continue;
            }
            for (t, lp) in total.iter_mut().zip(m.score_next(s)) {
                *t += w * lp;
            }
        }
        total[Vocab::BOS_ID as usize] = f64::NEG_INFINITY;
        total
    }

    fn advance(&self, state: &ScorerState, token: TokenId) -> ScorerState {
        let ScorerState::Parts(parts) = state else {
            panic!("ensemble expects a per-member state");
        };
        ScorerState::Parts(
            self.members
                .iter()
                .zip(parts)
                .map(|(m, s)| m.advance(s, token))
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::scorers::{SyntheticScorer, UniformScorer};

    #[test]
    fn weighted_sum_of_members() {
        let v = Vocab::from_tokens(["a", "b"]);
        let a: SharedScorer = Arc::new(SyntheticScorer::new(v.clone(), 1));
        let b: SharedScorer = Arc::new(SyntheticScorer::new(v.clone(), 2));
        let e = log_linear_ensemble(vec![a.clone(), b.clone()], Some(vec![0.3, 0.7])).unwrap();
        let seq = [2, 3, 1];
        let expect = 0.3 * a.score_sequence(&seq) + 0.7 * b.score_sequence(&seq);
        assert!((e.score_sequence(&seq) - expect).abs() < 1e-12);
    }

    #[test]
    fn validates_members() {
        let a: SharedScorer = Arc::new(UniformScorer::new(Vocab::from_tokens(["a"])));
        let b: SharedScorer = Arc::new(UniformScorer::new(Vocab::from_tokens(["b"])));
        assert!(matches!(
            log_linear_ensemble(vec![a.clone(), b], None),
            Err(ScorerError::VocabMismatch)
        ));
        assert!(matches!(
            log_linear_ensemble(vec![a.clone()], Some(vec![1.0, 1.0])),
            Err(ScorerError::WeightCount { .. })
        ));
        assert!(matches!(
            log_linear_ensemble(vec![a], Some(vec![-1.0])),
            Err(ScorerError::InvalidWeight)
        ));
    }
}
