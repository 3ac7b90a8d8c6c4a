use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{batch_corpus, Batch, ToyModel, ToyScorer, TrainConfig, TrainError};
use crate::tokens::{TokenId, Vocab};

/// Summed gradients of the batches seen since the last update.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientAccumulator {
    pub grad: Vec<f64>,
    pub token_count: usize,
    pub batches_seen: usize,
    pub loss: f64,
    /// Norm of each accumulated batch's per-token gradient.
    pub batch_norms: Vec<f64>,
}

impl GradientAccumulator {
    pub fn new(num_params: usize) -> Self {
        GradientAccumulator {
            grad: vec![0.0; num_params],
            token_count: 0,
            batches_seen: 0,
            loss: 0.0,
            batch_norms: Vec::new(),
        }
    }

    pub fn reset(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
        self.token_count = 0;
        self.batches_seen = 0;
        self.loss = 0.0;
        self.batch_norms.clear();
    }

    pub fn add(&mut self, model: &ToyModel, batch: &[Vec<TokenId>]) -> Result<(), TrainError> {
        let (g, loss, tokens) = model.backward(batch)?;
        if tokens > 0 {
            let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt() / tokens as f64;
            self.batch_norms.push(norm);
        }
        for (a, b) in self.grad.iter_mut().zip(&g) {
            *a += b;
        }
        self.token_count += tokens;
        self.batches_seen += 1;
        self.loss += loss;
        Ok(())
    }

    /// One SGD step with the token-mean gradient.
    pub fn apply(&self, model: &mut ToyModel, learning_rate: f64) -> Result<(), TrainError> {
        if self.token_count == 0 {
            return Err(TrainError::EmptyBatches);
        }
        let scale = learning_rate / self.token_count as f64;
        for (p, g) in model.params_mut().iter_mut().zip(&self.grad) {
            *p -= scale * g;
        }
        Ok(())
    }
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq)]
pub struct UpdateLog {
    pub step: usize,
    pub tokens: usize,
    /// Mean loss per token over the accumulated batches, before the update.
    pub loss: f64,
    /// Variance of per-batch gradient norms inside the window.
    pub grad_norm_var: f64,
}

impl fmt::Display for UpdateLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "step={}\ttokens={}\tloss={:.6}\tgrad_norm_var={:.6e}",
            self.step, self.tokens, self.loss, self.grad_norm_var
        )
    }
}

fn variance(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64
}

fn update(
    model: &mut ToyModel,
    acc: &mut GradientAccumulator,
    window: &[Batch],
    learning_rate: f64,
    step: usize,
) -> Result<UpdateLog, TrainError> {
    acc.reset();
    for batch in window {
        acc.add(model, batch)?;
    }
    acc.apply(model, learning_rate)?;
    Ok(UpdateLog {
        step,
        tokens: acc.token_count,
        loss: acc.loss / acc.token_count as f64,
        grad_norm_var: variance(&acc.batch_norms),
    })
}

/// Delayed SGD: every `batches_per_update` consecutive batches contribute
/// one update, so there are ⌈batches / K⌉ updates.
pub fn accumulate_and_update(
    model: &mut ToyModel,
    batches: &[Batch],
    config: &TrainConfig,
) -> Result<Vec<UpdateLog>, TrainError> {
    config.validate()?;
    if batches.is_empty() {
        return Err(TrainError::EmptyBatches);
    }
    let mut acc = GradientAccumulator::new(model.params().len());
    batches
        .chunks(config.batches_per_update)
        .enumerate()
        .map(|(i, window)| update(model, &mut acc, window, config.learning_rate, i + 1))
        .collect()
}

/// Elementwise mean of parameter sets.
pub fn average_checkpoints(models: &[ToyModel]) -> Result<ToyModel, TrainError> {
    let first = models.first().ok_or(TrainError::EmptyBatches)?;
    if models
        .iter()
        .any(|m| m.vocab_size() != first.vocab_size() || m.hidden() != first.hidden())
    {
        return Err(TrainError::ShapeMismatch);
    }
    let mut sum = vec![0.0; first.params().len()];
    for m in models {
        for (s, p) in sum.iter_mut().zip(m.params()) {
            *s += p;
        }
    }
    let n = models.len() as f64;
    sum.iter_mut().for_each(|s| *s /= n);
    ToyModel::from_params(first.vocab_size(), first.hidden(), sum)
}

/// Mean per-token negative log-likelihood on `corpus`.
pub fn evaluate(model: &ToyModel, corpus: &[Vec<TokenId>]) -> Result<f64, TrainError> {
    let (loss, tokens) = model.forward_loss(corpus)?;
    if tokens == 0 {
        return Err(TrainError::EmptyCorpus);
    }
    Ok(loss / tokens as f64)
}

#[derive(Clone, Debug)]
pub struct Trained {
    pub scorer: ToyScorer,
    pub log: Vec<UpdateLog>,
}

/// Trains for `max_steps` updates. Batches are rebuilt each epoch and
/// visited in a seeded random order; the stream of batches depends only on
/// the seed, so runs with different `batches_per_update` see the same data
/// in the same order.
pub fn train(corpus: &[Vec<TokenId>], vocab: Vocab, config: &TrainConfig) -> Result<Trained, TrainError> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    let batches = batch_corpus(corpus, config.batch_size_tokens)?;
    let mut model = ToyModel::random(vocab.len(), config.hidden, config.init_scale, config.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_ba7c);
    let mut order: Vec<usize> = Vec::new();
    let mut stream = std::iter::from_fn(|| {
        if order.is_empty() {
            order = (0..batches.len()).collect();
            order.shuffle(&mut rng);
        }
        order.pop().map(|i| batches[i].clone())
    });
    let mut acc = GradientAccumulator::new(model.params().len());
    let mut log = Vec::with_capacity(config.max_steps);
    let mut recent = Vec::new();
    for step in 1..=config.max_steps {
        let window: Vec<Batch> = stream.by_ref().take(config.batches_per_update).collect();
        log.push(update(&mut model, &mut acc, &window, config.learning_rate, step)?);
        if config.max_steps - step < config.average_last {
            recent.push(model.clone());
        }
    }
    let model = average_checkpoints(&recent)?;
    Ok(Trained {
        scorer: ToyScorer::new(model, vocab)?,
        log,
    })
}
