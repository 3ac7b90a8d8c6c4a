//! Brute-force reference search: every external sequence up to `max_len`,
//! and for each, every internal path through the transducer.

use super::DecodeError;
use crate::scorers::{ScorerState, SequenceScorer};
use crate::tokens::{SymbolClass, TokenId, Vocab};
use crate::transducer::{MappingTransducer, Output};

/// Largest number of external sequences the oracle will enumerate.
pub const EXHAUSTIVE_LIMIT: f64 = 1e6;

#[derive(Clone, Debug, PartialEq)]
pub struct ExhaustiveResult {
    /// External ids without `</s>`.
    pub external_ids: Vec<TokenId>,
    /// Best internal path per internal model, without `</s>`.
    pub internal_ids: Vec<Vec<TokenId>>,
    pub score: f64,
}

struct Internal<'a> {
    model: &'a dyn SequenceScorer,
    transducer: &'a MappingTransducer,
    classes: Vec<SymbolClass>,
}

/// Exact maximizer of `w_0 · log P_o(o) + Σ_i w_i · max log P_i(x)` over
/// complete external outputs `o` (ending in `</s>`, at most `max_len`
/// tokens) and internal paths `x` with projection `o`, where each internal
/// path consumes at most `expansion_cap` silent symbols per external token.
/// Ties go to the lexicographically smallest external ids.
pub fn exhaustive_argmax(
    external: &dyn SequenceScorer,
    internals: &[(&dyn SequenceScorer, &MappingTransducer)],
    weights: &[f64],
    max_len: usize,
    expansion_cap: usize,
) -> Result<Option<ExhaustiveResult>, DecodeError> {
    let candidates = ((external.vocab().len() - 1) as f64).powi(max_len as i32);
    if candidates > EXHAUSTIVE_LIMIT {
        return Err(DecodeError::TooLarge {
            candidates,
            limit: EXHAUSTIVE_LIMIT,
        });
    }
    if weights.len() != internals.len() + 1 {
        return Err(DecodeError::InvalidConfig("one weight per model".into()));
    }
    let internals: Vec<Internal> = internals
        .iter()
        .map(|&(model, transducer)| Internal {
            model,
            transducer,
            classes: model
                .vocab()
                .tokens()
                .iter()
                .map(|t| transducer.classifier().classify(t))
                .collect(),
        })
        .collect();
    let mut best: Option<(f64, Vec<TokenId>, Vec<Vec<TokenId>>)> = None;
    let mut prefix = Vec::new();
    enumerate(
        external,
        &external.initial_state(),
        0.0,
        &mut prefix,
        max_len,
        &mut |ids, ext_logprob| {
            let tokens = external.vocab().decode(ids);
            let mut score = weights[0] * ext_logprob;
            let mut paths = Vec::new();
            for (w, int) in weights[1..].iter().zip(&internals) {
                let (lp, path) = best_internal(int, &tokens, expansion_cap)?;
                score += w * lp;
                paths.push(path);
            }
            let better = match &best {
                None => true,
                Some((s, b, _)) => score > *s || (score == *s && ids < &b[..]),
            };
            if better {
                best = Some((score, ids.to_vec(), paths));
            }
            Some(())
        },
    );
    let strip = |ids: Vec<TokenId>| ids.into_iter().filter(|&t| t != Vocab::EOS_ID).collect();
    Ok(best.map(|(score, ext, ints)| ExhaustiveResult {
        external_ids: strip(ext),
        internal_ids: ints.into_iter().map(strip).collect(),
        score,
    }))
}

/// Calls `visit` with every complete external sequence (ending in `</s>`)
/// and its log-probability.
fn enumerate(
    model: &dyn SequenceScorer,
    state: &ScorerState,
    logprob: f64,
    prefix: &mut Vec<TokenId>,
    max_len: usize,
    visit: &mut dyn FnMut(&[TokenId], f64) -> Option<()>,
) {
    if prefix.len() >= max_len {
        return;
    }
    let lp = model.score_next(state);
    for tok in 1..model.vocab().len() as TokenId {
        let l = lp[tok as usize];
        if l == f64::NEG_INFINITY {
            continue;
        }
        prefix.push(tok);
        if tok == Vocab::EOS_ID {
            visit(prefix, logprob + l);
        } else {
            let next = model.advance(state, tok);
            enumerate(model, &next, logprob + l, prefix, max_len, visit);
        }
        prefix.pop();
    }
}

/// Best internal log-probability over paths projecting to `external`, and
/// that path; `None` if no path exists.
fn best_internal(int: &Internal, external: &[String], cap: usize) -> Option<(f64, Vec<TokenId>)> {
    let mut best: Option<(f64, Vec<TokenId>)> = None;
    let mut path = Vec::new();
    search(
        int,
        int.transducer.start(),
        &int.model.initial_state(),
        0.0,
        external,
        0,
        &mut path,
        &mut Vec::new(),
        &mut best,
        cap,
    );
    best
}

#[allow(clippy::too_many_arguments)]
fn search(
    int: &Internal,
    state: usize,
    scorer_state: &ScorerState,
    logprob: f64,
    external: &[String],
    silent: usize,
    path: &mut Vec<TokenId>,
    run: &mut Vec<String>,
    best: &mut Option<(f64, Vec<TokenId>)>,
    cap: usize,
) {
    let t = int.transducer;
    if external.is_empty() {
        if t.is_final(state) && run.is_empty() {
            let better = match best {
                None => true,
                Some((s, p)) => logprob > *s || (logprob == *s && path < p),
            };
            if better {
                *best = Some((logprob, path.clone()));
            }
        }
        return;
    }
    let vocab = int.model.vocab();
    let mut lp = None;
    for arc in t.arcs() {
        if arc.from != state {
            continue;
        }
        match (arc.input, arc.output) {
            (None, Output::Eps) => {
                search(int, arc.to, scorer_state, logprob, external, silent, path, run, best, cap)
            }
            (None, Output::Class(c)) => {
                if t.classifier().classify(&external[0]) == c {
                    search(int, arc.to, scorer_state, logprob, &external[1..], 0, path, run, best, cap)
                }
            }
            (None, _) => unreachable!("rejected at construction"),
            (Some(class), output) => {
                let lp = lp.get_or_insert_with(|| int.model.score_next(scorer_state));
                for tok in 1..vocab.len() as TokenId {
                    if int.classes[tok as usize] != class || lp[tok as usize] == f64::NEG_INFINITY {
                        continue;
                    }
                    let text = vocab.token(tok);
                    let rest = match output {
                        Output::Eps => {
                            if silent >= cap {
                                continue;
                            }
                            None
                        }
                        Output::Copy => {
                            if text != external[0] {
                                continue;
                            }
                            Some(&external[1..])
                        }
                        Output::Word => {
                            let mut joined = run.clone();
                            joined.push(text.to_string());
                            if !t.accepts(&joined, &external[..1], true) {
                                continue;
                            }
                            Some(&external[1..])
                        }
                        Output::Class(_) => unreachable!("reading arcs write tokens"),
                    };
                    let saved = run.clone();
                    match output {
                        Output::Eps if class == SymbolClass::Piece => run.push(text.to_string()),
                        Output::Word => run.clear(),
                        _ => {}
                    }
                    path.push(tok);
                    let l = logprob + lp[tok as usize];
                    // `</s>` is the last internal symbol
                    let next_state = if tok == Vocab::EOS_ID { scorer_state.clone() } else { int.model.advance(scorer_state, tok) };
                    match rest {
                        None => search(int, arc.to, &next_state, l, external, silent + 1, path, run, best, cap),
                        Some(rest) => search(int, arc.to, &next_state, l, rest, 0, path, run, best, cap),
                    }
                    path.pop();
                    *run = saved;
                }
            }
        }
    }
}
