//! Delayed-SGD training of a small recurrent scorer.
//!
//! Losses are summed over target tokens; an update divides the gradient
//! accumulated over `batches_per_update` batches by their total token count,
//! so accumulating K batches is the same step as one batch holding all of them.

mod batching;
mod model;
mod sgd;

use thiserror::Error;

pub use batching::{batch_corpus, padded_tokens, Batch};
pub use model::{layout, Block, ToyModel, ToyScorer};
pub use sgd::{
    accumulate_and_update, average_checkpoints, evaluate, train, GradientAccumulator, Trained,
    UpdateLog,
};

use crate::tokens::TokenId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("token id {0} cannot appear in a training sequence")]
    IdOutOfRange(TokenId),
    #[error("sequence of length {len} exceeds the batch budget of {budget} tokens")]
    SequenceTooLong { len: usize, budget: usize },
    #[error("no batches to train on")]
    EmptyBatches,
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("parameter shapes do not match")]
    ShapeMismatch,
    #[error("checkpoint line {line}: {reason}")]
    Checkpoint { line: usize, reason: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    /// Padded tokens per batch.
    pub batch_size_tokens: usize,
    /// Batches whose gradients are summed before one update.
    pub batches_per_update: usize,
    pub learning_rate: f64,
    /// Number of parameter updates.
    pub max_steps: usize,
    pub seed: u64,
    pub hidden: usize,
    /// Initial parameters are uniform in `[-init_scale, init_scale]`.
    pub init_scale: f64,
    /// Average the parameters after each of the last N updates.
    pub average_last: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size_tokens: 4096,
            batches_per_update: 1,
            learning_rate: 0.2,
            max_steps: 100,
            seed: 0,
            hidden: 16,
            init_scale: 0.1,
            average_last: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |what: &str| Err(TrainError::InvalidConfig(what.to_string()));
        if self.batch_size_tokens == 0 {
            return bad("batch_size_tokens must be positive");
        }
        if self.batches_per_update == 0 {
            return bad("batches_per_update must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.max_steps == 0 || self.hidden == 0 || self.average_last == 0 {
            return bad("max_steps, hidden and average_last must be positive");
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return bad("init_scale must be >= 0");
        }
        Ok(())
    }
}
