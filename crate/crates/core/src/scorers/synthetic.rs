//! Small scorers with known distributions, used as oracles and stand-ins.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{log_softmax, ScorerState, SequenceScorer};
use crate::tokens::{TokenId, Vocab};

/// Every token except `<s>` is equally likely at every step.
#[derive(Clone, Debug)]
pub struct UniformScorer {
    vocab: Vocab,
}

impl UniformScorer {
    pub fn new(vocab: Vocab) -> Self {
        UniformScorer { vocab }
    }
}

impl SequenceScorer for UniformScorer {
    fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    fn initial_state(&self) -> ScorerState {
        ScorerState::Tokens(Vec::new())
    }

    fn score_next(&self, _state: &ScorerState) -> Vec<f64> {
        let lp = -((self.vocab.len() - 1) as f64).ln();
        let mut out = vec![lp; self.vocab.len()];
        out[Vocab::BOS_ID as usize] = f64::NEG_INFINITY;
        out
    }

    fn advance(&self, _state: &ScorerState, _token: TokenId) -> ScorerState {
        ScorerState::Tokens(Vec::new())
    }
}

/// Puts all mass on one target sequence followed by `</s>`. Off the target
/// path the distribution is uniform.
#[derive(Clone, Debug)]
pub struct DeterministicScorer {
    vocab: Vocab,
    target: Vec<TokenId>,
}

impl DeterministicScorer {
    pub fn new(vocab: Vocab, target: &[TokenId]) -> Self {
        let mut target = target.to_vec();
        target.push(Vocab::EOS_ID);
        DeterministicScorer { vocab, target }
    }
}

impl SequenceScorer for DeterministicScorer {
    fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    fn initial_state(&self) -> ScorerState {
        ScorerState::Tokens(Vec::new())
    }

    fn score_next(&self, state: &ScorerState) -> Vec<f64> {
        let prefix = state.tokens();
        if prefix.len() < self.target.len() && self.target.starts_with(prefix) {
            let mut out = vec![f64::NEG_INFINITY; self.vocab.len()];
            out[self.target[prefix.len()] as usize] = 0.0;
            out
        } else {
            UniformScorer::new(self.vocab.clone()).score_next(state)
        }
    }

    fn advance(&self, state: &ScorerState, token: TokenId) -> ScorerState {
        let mut prefix = state.tokens().to_vec();
        prefix.push(token);
        ScorerState::Tokens(prefix)
    }
}

/// Seeded pseudo-random scorer: the distribution after a prefix is a
/// deterministic function of `(seed, prefix)`. `</s>` grows more likely
/// with prefix length so that searches terminate.
#[derive(Clone, Debug)]
pub struct SyntheticScorer {
    vocab: Vocab,
    seed: u64,
    sharpness: f64,
    eos_growth: f64,
}

impl SyntheticScorer {
    pub fn new(vocab: Vocab, seed: u64) -> Self {
        SyntheticScorer {
            vocab,
            seed,
            sharpness: 2.0,
            eos_growth: 0.5,
        }
    }

    /// Spread of the random logits; larger values give peakier distributions.
    pub fn sharpness(mut self, sharpness: f64) -> Self {
        self.sharpness = sharpness;
        self
    }

    /// Added to the `</s>` logit once per prefix token.
    pub fn eos_growth(mut self, growth: f64) -> Self {
        self.eos_growth = growth;
        self
    }

    fn prefix_seed(&self, prefix: &[TokenId]) -> u64 {
        // splitmix64 fold: stable across platforms and compiler versions
        let mut h = self.seed ^ 0x9e37_79b9_7f4a_7c15;
        for &t in prefix.iter().chain(std::iter::once(&u32::MAX)) {
            h = h.wrapping_add(u64::from(t)).wrapping_add(0x9e37_79b9_7f4a_7c15);
            let mut z = h;
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
            h = z ^ (z >> 31);
        }
        h
    }
}

impl SequenceScorer for SyntheticScorer {
    fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    fn initial_state(&self) -> ScorerState {
        ScorerState::Tokens(Vec::new())
    }

    fn score_next(&self, state: &ScorerState) -> Vec<f64> {
        let prefix = state.tokens();
        let mut rng = ChaCha8Rng::seed_from_u64(self.prefix_seed(prefix));
        let mut logits: Vec<f64> = (0..self.vocab.len())
            .map(|_| rng.gen_range(-1.0..1.0) * self.sharpness)
            .collect();
        logits[Vocab::EOS_ID as usize] += self.eos_growth * prefix.len() as f64;
        log_softmax(&mut logits);
        logits
    }

    fn advance(&self, state: &ScorerState, token: TokenId) -> ScorerState {
        let mut prefix = state.tokens().to_vec();
        prefix.push(token);
        ScorerState::Tokens(prefix)
    }
}
