//! Beam search over one external representation, optionally ensembled with
//! models of other representations kept in sync through mapping transducers.
//!
//! A hypothesis scores `w_0 · log P_o(h) + Σ_i w_i · max log P_i(x)` where
//! the max runs over the inner beam of internal prefixes `x` that project to
//! `h`. No length normalization is applied.

mod exhaustive;

use std::cmp::Ordering;
use std::sync::Arc;

use thiserror::Error;

pub use exhaustive::{exhaustive_argmax, ExhaustiveResult, EXHAUSTIVE_LIMIT};

use crate::scorers::{
    log_linear_ensemble, with_nonterminal_penalty, ScorerError, ScorerState, SharedScorer,
};
use crate::tokens::{Classifier, Representation, SymbolClass, TokenId, TokenSeq, Vocab, DEFAULT_MARKER};
use crate::transducer::{cmp_states, MappingTransducer, SyncState, Synchronizer, DEFAULT_EXPANSION_CAP};
use crate::wellformed::WellformedAutomaton;

pub use crate::wellformed::wellformed_mask;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecodeError {
    #[error("no synchronizable path: every hypothesis died at output position {position}")]
    NoSynchronizablePath { position: usize },
    #[error("invalid decoder configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Scorer(#[from] ScorerError),
    #[error("exhaustive search over up to {candidates} sequences exceeds the limit of {limit}")]
    TooLarge { candidates: f64, limit: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecodeConfig {
    pub beam: usize,
    /// Synchronized internal states kept per hypothesis; `None` means `4 · beam`.
    pub inner_beam: Option<usize>,
    /// Longest external output, counting `</s>`.
    pub max_len: usize,
    pub expansion_cap: usize,
    /// Added to the log-score of every syntactic token of syntax models; `<= 0`.
    pub nonterminal_gamma: f64,
    pub constrain_wellformed: bool,
    /// One weight per model, external first; `None` means all 1.
    pub ensemble_weights: Option<Vec<f64>>,
    pub trace: bool,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            beam: 4,
            inner_beam: None,
            max_len: 100,
            expansion_cap: DEFAULT_EXPANSION_CAP,
            nonterminal_gamma: 0.0,
            constrain_wellformed: false,
            ensemble_weights: None,
            trace: false,
        }
    }
}

impl DecodeConfig {
    pub fn inner_beam(&self) -> usize {
        self.inner_beam.unwrap_or(4 * self.beam)
    }

    /// Beams wide enough that nothing is ever pruned on tiny instances.
    pub fn exhaustive(max_len: usize) -> Self {
        DecodeConfig {
            beam: usize::MAX / 8,
            inner_beam: Some(usize::MAX / 8),
            max_len,
            ..DecodeConfig::default()
        }
    }

    fn validate(&self, models: usize) -> Result<Vec<f64>, DecodeError> {
        let bad = |m: &str| Err(DecodeError::InvalidConfig(m.to_string()));
        if self.beam == 0 || self.inner_beam() == 0 {
            return bad("beam sizes must be at least 1");
        }
        if self.max_len == 0 {
            return bad("max_len must be at least 1");
        }
        if !(self.nonterminal_gamma <= 0.0) {
            return Err(ScorerError::PositivePenalty(self.nonterminal_gamma).into());
        }
        let weights = self
            .ensemble_weights
            .clone()
            .unwrap_or_else(|| vec![1.0; models]);
        if weights.len() != models {
            return Err(ScorerError::WeightCount {
                expected: models,
                got: weights.len(),
            }
            .into());
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(ScorerError::InvalidWeight.into());
        }
        Ok(weights)
    }
}

/// A scorer with the representation it produces and the classifier that
/// recognizes that representation's syntactic tokens.
#[derive(Clone)]
pub struct Model {
    pub scorer: SharedScorer,
    pub kind: Representation,
    pub classifier: Classifier,
}

impl Model {
    pub fn new(scorer: SharedScorer, kind: Representation, classifier: Classifier) -> Self {
        Model {
            scorer,
            kind,
            classifier,
        }
    }

    /// A plain-text model with the default subword marker.
    pub fn plain(scorer: SharedScorer) -> Self {
        Model::new(scorer, Representation::PlainText, Classifier::lexical(DEFAULT_MARKER))
    }

    fn penalized(&self, gamma: f64) -> Result<SharedScorer, DecodeError> {
        if gamma == 0.0 || !self.kind.is_syntax() {
            return Ok(self.scorer.clone());
        }
        Ok(Arc::new(with_nonterminal_penalty(
            self.scorer.clone(),
            gamma,
            &self.classifier,
        )?))
    }
}

/// A model of another representation plus the transducer mapping it to the
/// external one. The transducer's classifier classifies its tokens.
#[derive(Clone)]
pub struct InternalModel {
    pub scorer: SharedScorer,
    pub kind: Representation,
    pub transducer: MappingTransducer,
}

impl InternalModel {
    pub fn new(scorer: SharedScorer, kind: Representation, transducer: MappingTransducer) -> Self {
        InternalModel {
            scorer,
            kind,
            transducer,
        }
    }

    fn as_model(&self) -> Model {
        Model::new(
            self.scorer.clone(),
            self.kind,
            self.transducer.classifier().clone(),
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecodeOutput {
    /// Best external output, without `</s>`.
    pub external: TokenSeq,
    pub external_ids: Vec<TokenId>,
    /// Best synchronized internal sequence per internal model, without `</s>`.
    pub internal: Vec<TokenSeq>,
    pub internal_ids: Vec<Vec<TokenId>>,
    /// Combined weighted log-score.
    pub score: f64,
    pub external_logprob: f64,
    pub internal_logprobs: Vec<f64>,
    /// False when nothing finished within `max_len` and the best unfinished
    /// hypothesis is returned instead.
    pub finished: bool,
    /// Candidate extensions dropped because some internal model could not
    /// stay synchronized.
    pub dead_pruned: usize,
    /// One line per step when tracing is on.
    pub trace: Vec<String>,
}

struct Hyp {
    /// External ids including a final `</s>` once finished.
    ids: Vec<TokenId>,
    ext_state: ScorerState,
    ext_logprob: f64,
    inner: Vec<Vec<SyncState>>,
    score: f64,
    automaton: Option<WellformedAutomaton>,
}

/// Higher score first, then lexicographically smaller ids.
fn cmp_hyp(a: &Hyp, b: &Hyp) -> Ordering {
    b.score.total_cmp(&a.score).then_with(|| a.ids.cmp(&b.ids))
}

fn combine(weights: &[f64], ext_logprob: f64, inner: &[Vec<SyncState>]) -> f64 {
    let mut score = weights[0] * ext_logprob;
    for (w, states) in weights[1..].iter().zip(inner) {
        score += w * states[0].internal_logprob;
    }
    score
}

/// Beam search with one model.
pub fn decode_single(model: &Model, config: &DecodeConfig) -> Result<DecodeOutput, DecodeError> {
    decode_multi_rep(model, &[], config)
}

/// Beam search over the weighted product of models sharing one vocabulary
/// and representation.
pub fn decode_ensemble_same(models: &[Model], config: &DecodeConfig) -> Result<DecodeOutput, DecodeError> {
    let first = models
        .first()
        .ok_or_else(|| DecodeError::InvalidConfig("no models to ensemble".into()))?;
    if models.iter().any(|m| m.kind != first.kind) {
        return Err(DecodeError::InvalidConfig(
            "same-representation ensemble over different representations".into(),
        ));
    }
    let weights = config.validate(models.len())?;
    let ensemble = log_linear_ensemble(
        models.iter().map(|m| m.scorer.clone()).collect(),
        Some(weights),
    )?;
    let combined = Model::new(Arc::new(ensemble), first.kind, first.classifier.clone());
    let config = DecodeConfig {
        ensemble_weights: None,
        ..config.clone()
    };
    decode_multi_rep(&combined, &[], &config)
}

/// Outer beam over external tokens; each internal model keeps an inner beam
/// of synchronized prefixes. A hypothesis finishes when the external model
/// emits `</s>` and every internal model can end there too.
pub fn decode_multi_rep(
    external: &Model,
    internals: &[InternalModel],
    config: &DecodeConfig,
) -> Result<DecodeOutput, DecodeError> {
    let weights = config.validate(internals.len() + 1)?;
    let gamma = config.nonterminal_gamma;
    let inner_beam = config.inner_beam();
    let ext_scorer = external.penalized(gamma)?;
    let int_scorers: Vec<SharedScorer> = internals
        .iter()
        .map(|m| m.as_model().penalized(gamma))
        .collect::<Result<_, _>>()?;
    let syncs: Vec<Synchronizer> = internals
        .iter()
        .zip(&int_scorers)
        .map(|(m, s)| {
            let sync = Synchronizer::new(&m.transducer, s.as_ref());
            if config.constrain_wellformed && m.kind.is_syntax() {
                sync.constrained(m.kind)
            } else {
                sync
            }
        })
        .collect();

    let vocab: &Vocab = ext_scorer.vocab();
    let ext_classes: Vec<SymbolClass> = vocab
        .tokens()
        .iter()
        .map(|t| external.classifier.classify(t))
        .collect();
    let constrain_ext = config.constrain_wellformed && external.kind.is_syntax();

    let start = Hyp {
        ids: Vec::new(),
        ext_state: ext_scorer.initial_state(),
        ext_logprob: 0.0,
        inner: syncs.iter().map(|s| vec![s.start()]).collect(),
        score: 0.0,
        automaton: constrain_ext.then(|| WellformedAutomaton::new(external.kind)),
    };
    let mut active = vec![start];
    let mut best_finished: Option<Hyp> = None;
    let mut dead_pruned = 0usize;
    let mut trace = Vec::new();

    for step in 0..config.max_len {
        let mut next: Vec<Hyp> = Vec::new();
        let mut threshold = f64::NEG_INFINITY;
        let finished_score = |f: &Option<Hyp>| f.as_ref().map_or(f64::NEG_INFINITY, |h| h.score);

        for h in &active {
            let lp = ext_scorer.score_next(&h.ext_state);
            let mut order: Vec<TokenId> = (1..vocab.len() as TokenId)
                .filter(|&t| lp[t as usize] > f64::NEG_INFINITY)
                .collect();
            order.sort_by(|&a, &b| lp[b as usize].total_cmp(&lp[a as usize]).then(a.cmp(&b)));
            for tok in order {
                let ext_logprob = h.ext_logprob + lp[tok as usize];
                let is_eos = tok == Vocab::EOS_ID;
                // internal scores only fall, so the parent's internal part
                // bounds every extension; tokens come in falling external
                // score, so the bound falls too
                let ub = combine(&weights, ext_logprob, &h.inner);
                if ub < finished_score(&best_finished) {
                    break;
                }
                if !is_eos && next.len() >= config.beam && ub < threshold {
                    continue;
                }
                let automaton = match &h.automaton {
                    Some(a) => match a.step(ext_classes[tok as usize]) {
                        Some(next_a) => {
                            let used = h.ids.len() + 1;
                            if !is_eos && used + next_a.min_to_complete() + 1 > config.max_len {
                                continue;
                            }
                            Some(next_a)
                        }
                        None => continue,
                    },
                    None => None,
                };
                let token = vocab.token(tok);
                let mut inner = Vec::with_capacity(syncs.len());
                for (sync, states) in syncs.iter().zip(&h.inner) {
                    let mut succ: Vec<SyncState> = states
                        .iter()
                        .flat_map(|s| sync.advance(s, token, config.expansion_cap, inner_beam))
                        .collect();
                    if is_eos {
                        succ.retain(|s| sync.is_final_synced(s));
                    }
                    succ.sort_by(cmp_states);
                    succ.dedup_by(|a, b| a.state == b.state && a.internal_prefix == b.internal_prefix);
                    succ.truncate(inner_beam);
                    if succ.is_empty() {
                        break;
                    }
                    inner.push(succ);
                }
                if inner.len() < syncs.len() {
                    dead_pruned += 1;
                    continue;
                }
                let mut ids = h.ids.clone();
                ids.push(tok);
                let cand = Hyp {
                    score: combine(&weights, ext_logprob, &inner),
                    ext_state: if is_eos { h.ext_state.clone() } else { ext_scorer.advance(&h.ext_state, tok) },
                    ids,
                    ext_logprob,
                    inner,
                    automaton,
                };
                if is_eos {
                    let better = best_finished
                        .as_ref()
                        .is_none_or(|b| cmp_hyp(&cand, b) == Ordering::Less);
                    if better {
                        best_finished = Some(cand);
                    }
                } else {
                    next.push(cand);
                    if next.len() >= config.beam {
                        next.sort_by(cmp_hyp);
                        next.truncate(config.beam);
                        threshold = next[config.beam - 1].score;
                    }
                }
            }
        }
        next.sort_by(cmp_hyp);
        next.truncate(config.beam);
        if config.trace {
            let best = next.first();
            trace.push(format!(
                "step={step}\tactive={}\tfinished={}\tdead={dead_pruned}\tbest_active={}\tbest_finished={}\tprefix={}",
                next.len(),
                best_finished.is_some() as u8,
                best.map_or("-inf".to_string(), |h| format!("{:.6}", h.score)),
                best_finished.as_ref().map_or("-inf".to_string(), |h| format!("{:.6}", h.score)),
                best.map_or(String::new(), |h| vocab.decode(&h.ids).join(" ")),
            ));
        }
        if next.is_empty() {
            if best_finished.is_none() {
                return Err(DecodeError::NoSynchronizablePath { position: step });
            }
            active = next;
            break;
        }
        // scores never increase along a chain, so a strictly better finished
        // hypothesis ends the search
        if let Some(f) = &best_finished {
            if f.score > next[0].score {
                active = next;
                break;
            }
        }
        active = next;
    }

    let (best, finished) = match best_finished {
        Some(h) => (h, true),
        None => (
            active.into_iter().next().expect("non-empty when nothing finished"),
            false,
        ),
    };
    Ok(output(best, finished, external.kind, vocab, internals, &syncs, dead_pruned, trace))
}

#[allow(clippy::too_many_arguments)]
fn output(
    best: Hyp,
    finished: bool,
    kind: Representation,
    vocab: &Vocab,
    internals: &[InternalModel],
    syncs: &[Synchronizer],
    dead_pruned: usize,
    trace: Vec<String>,
) -> DecodeOutput {
    let strip = |ids: &[TokenId]| -> Vec<TokenId> {
        ids.iter().copied().filter(|&t| t != Vocab::EOS_ID).collect()
    };
    let external_ids = strip(&best.ids);
    let internal_ids: Vec<Vec<TokenId>> = best
        .inner
        .iter()
        .map(|states| strip(&states[0].internal_prefix))
        .collect();
    DecodeOutput {
        external: TokenSeq::new(kind, vocab.decode(&external_ids)),
        internal: internal_ids
            .iter()
            .zip(internals.iter().zip(syncs))
            .map(|(ids, (m, s))| TokenSeq::new(m.kind, s.model().vocab().decode(ids)))
            .collect(),
        internal_logprobs: best.inner.iter().map(|s| s[0].internal_logprob).collect(),
        external_ids,
        internal_ids,
        score: best.score,
        external_logprob: best.ext_logprob,
        finished,
        dead_pruned,
        trace,
    }
}
