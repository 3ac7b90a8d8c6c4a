//! Mapping transducers between an internal representation (what a component
//! model scores) and the external representation beam search emits.
//!
//! Arcs are labelled with symbol classes rather than tokens, so a transducer
//! has a handful of arcs whatever the vocabulary size. All weight comes from
//! the models; the transducer itself is unweighted.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt::Write as _;
use std::rc::Rc;

use thiserror::Error;

use crate::scorers::{ScorerState, SequenceScorer};
use crate::subword::BpeModel;
use crate::tokens::{Classifier, Representation, SymbolClass, TokenId, Vocab};
use crate::wellformed::WellformedAutomaton;

/// Default bound on silent internal symbols consumed per external symbol.
pub const DEFAULT_EXPANSION_CAP: usize = 10;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TransducerError {
    #[error("arc {index} refers to state {state}, but there are only {states} states")]
    BadState { index: usize, state: usize, states: usize },
    #[error("arc {index} reads nothing, so it can only write nothing or a symbol class")]
    EmptyInputCopies { index: usize },
    #[error("arc {index} reads a symbol and writes a bare class; use a read-nothing arc")]
    ClassOutputReads { index: usize },
    #[error("arcs reading and writing nothing form a cycle through state {state}")]
    EpsilonCycle { state: usize },
    #[error("a `WORD` arc needs a subword model")]
    MissingSegmenter,
    #[error("word-joining arcs cannot be inverted")]
    NotInvertible,
}

/// What an arc writes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Output {
    /// Nothing.
    Eps,
    /// The consumed internal token itself.
    Copy,
    /// The word formed by the pending subword run plus the consumed token.
    Word,
    /// Any external token of this class, reading nothing.
    Class(SymbolClass),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Arc {
    pub from: usize,
    /// `None` reads nothing.
    pub input: Option<SymbolClass>,
    pub output: Output,
    pub to: usize,
}

#[derive(Clone, Debug)]
pub struct MappingTransducer {
    num_states: usize,
    start: usize,
    finals: Vec<bool>,
    arcs: Vec<Arc>,
    by_state: Vec<Vec<usize>>,
    closure: Vec<Vec<usize>>,
    classifier: Classifier,
    segmenter: Option<BpeModel>,
}

impl MappingTransducer {
    pub fn new(
        num_states: usize,
        start: usize,
        finals: &[usize],
        arcs: Vec<Arc>,
        classifier: Classifier,
        segmenter: Option<BpeModel>,
    ) -> Result<Self, TransducerError> {
        let check = |index: usize, state: usize| {
            if state < num_states {
                Ok(())
            } else {
                Err(TransducerError::BadState {
                    index,
                    state,
                    states: num_states,
                })
            }
        };
        check(usize::MAX, start)?;
        for &f in finals {
            check(usize::MAX, f)?;
        }
        let mut by_state = vec![Vec::new(); num_states];
        for (i, a) in arcs.iter().enumerate() {
            check(i, a.from)?;
            check(i, a.to)?;
            match (a.input, a.output) {
                (None, Output::Copy | Output::Word) => {
                    return Err(TransducerError::EmptyInputCopies { index: i })
                }
                (Some(_), Output::Class(_)) => {
                    return Err(TransducerError::ClassOutputReads { index: i })
                }
                (_, Output::Word) if segmenter.is_none() => {
                    return Err(TransducerError::MissingSegmenter)
                }
                _ => {}
            }
            by_state[a.from].push(i);
        }
        let mut t = MappingTransducer {
            num_states,
            start,
            finals: (0..num_states).map(|s| finals.contains(&s)).collect(),
            arcs,
            by_state,
            closure: Vec::new(),
            classifier,
            segmenter,
        };
        t.closure = (0..num_states)
            .map(|s| t.epsilon_closure(s))
            .collect::<Result<_, _>>()?;
        Ok(t)
    }

    fn is_silent_move(a: &Arc) -> bool {
        a.input.is_none() && a.output == Output::Eps
    }

    /// States reachable through arcs that read and write nothing, `state` first.
    fn epsilon_closure(&self, state: usize) -> Result<Vec<usize>, TransducerError> {
        fn visit(
            t: &MappingTransducer,
            s: usize,
            on_path: &mut Vec<bool>,
            seen: &mut Vec<bool>,
            out: &mut Vec<usize>,
        ) -> Result<(), TransducerError> {
            if on_path[s] {
                return Err(TransducerError::EpsilonCycle { state: s });
            }
            if seen[s] {
                return Ok(());
            }
            seen[s] = true;
            on_path[s] = true;
            out.push(s);
            for &i in &t.by_state[s] {
                if MappingTransducer::is_silent_move(&t.arcs[i]) {
                    visit(t, t.arcs[i].to, on_path, seen, out)?;
                }
            }
            on_path[s] = false;
            Ok(())
        }
        let mut out = Vec::new();
        visit(
            self,
            state,
            &mut vec![false; self.num_states],
            &mut vec![false; self.num_states],
            &mut out,
        )?;
        Ok(out)
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn is_final(&self, state: usize) -> bool {
        self.finals[state]
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn classifier(&self) -> &Classifier {
        &self.classifier
    }

    /// The same relation read in the other direction: deleted classes become
    /// classes written from nothing, and vice versa.
    pub fn invert(&self) -> Result<MappingTransducer, TransducerError> {
        let arcs = self
            .arcs
            .iter()
            .map(|a| {
                let (input, output) = match (a.input, a.output) {
                    (Some(c), Output::Eps) => (None, Output::Class(c)),
                    (None, Output::Class(c)) => (Some(c), Output::Eps),
                    (Some(_), Output::Word) => return Err(TransducerError::NotInvertible),
                    other => other,
                };
                Ok(Arc {
                    from: a.from,
                    input,
                    output,
                    to: a.to,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let finals: Vec<usize> = (0..self.num_states).filter(|&s| self.finals[s]).collect();
        MappingTransducer::new(
            self.num_states,
            self.start,
            &finals,
            arcs,
            self.classifier.clone(),
            None,
        )
    }

    /// External projection of a complete internal sequence, if some path
    /// from the start to a final state reads exactly `internal`.
    ///
    /// Arcs that write without reading are not followed. For the deletion
    /// and subword transducers the projection is unique.
    pub fn project<S: AsRef<str>>(&self, internal: &[S]) -> Option<Vec<String>> {
        let classes: Vec<SymbolClass> = internal
            .iter()
            .map(|t| self.classifier.classify(t.as_ref()))
            .collect();
        let mut out = Vec::new();
        self.project_from(self.start, internal, &classes, &mut Vec::new(), &mut out)
            .then_some(out)
    }

    fn project_from<S: AsRef<str>>(
        &self,
        state: usize,
        input: &[S],
        classes: &[SymbolClass],
        run: &mut Vec<String>,
        out: &mut Vec<String>,
    ) -> bool {
        for &q in &self.closure[state] {
            if input.is_empty() {
                if self.finals[q] && run.is_empty() {
                    return true;
                }
                continue;
            }
            for &i in &self.by_state[q] {
                let a = &self.arcs[i];
                if a.input != Some(classes[0]) {
                    continue;
                }
                let tok = input[0].as_ref();
                let (saved_run, saved_out) = (run.clone(), out.len());
                match a.output {
                    Output::Eps => {
                        if classes[0] == SymbolClass::Piece {
                            run.push(tok.to_string());
                        }
                    }
                    Output::Copy => out.push(tok.to_string()),
                    Output::Word => {
                        run.push(tok.to_string());
                        match self.join_run(run) {
                            Some(w) => {
                                out.push(w);
                                run.clear();
                            }
                            None => {
                                *run = saved_run;
                                continue;
                            }
                        }
                    }
                    Output::Class(_) => unreachable!("rejected at construction"),
                }
                if self.project_from(a.to, &input[1..], &classes[1..], run, out) {
                    return true;
                }
                *run = saved_run;
                out.truncate(saved_out);
            }
        }
        false
    }

    /// The word a complete subword run spells, if the segmenter would
    /// produce exactly that run for it.
    fn join_run<S: AsRef<str>>(&self, run: &[S]) -> Option<String> {
        let model = self.segmenter.as_ref()?;
        let marker = model.marker();
        let (last, init) = run.split_last()?;
        let mut word = String::new();
        for p in init {
            word.push_str(p.as_ref().strip_suffix(marker)?);
        }
        word.push_str(last.as_ref());
        let expected = model.segment(&word);
        (expected.len() == run.len() && expected.iter().zip(run).all(|(e, r)| e == r.as_ref()))
            .then_some(word)
    }

    /// Whether some path reads `internal` and writes `external` and, when
    /// `require_final`, ends in a final state with no pending subword run.
    pub fn accepts<S: AsRef<str>, E: AsRef<str>>(
        &self,
        internal: &[S],
        external: &[E],
        require_final: bool,
    ) -> bool {
        let classes: Vec<SymbolClass> = internal
            .iter()
            .map(|t| self.classifier.classify(t.as_ref()))
            .collect();
        self.accepts_from(self.start, internal, &classes, external, &mut Vec::new(), require_final)
    }

    fn accepts_from<S: AsRef<str>, E: AsRef<str>>(
        &self,
        state: usize,
        input: &[S],
        classes: &[SymbolClass],
        external: &[E],
        run: &mut Vec<String>,
        require_final: bool,
    ) -> bool {
        for &q in &self.closure[state] {
            if input.is_empty()
                && external.is_empty()
                && (!require_final || (self.finals[q] && run.is_empty()))
            {
                return true;
            }
            for &i in &self.by_state[q] {
                let a = &self.arcs[i];
                if let (None, Output::Class(c)) = (a.input, a.output) {
                    if let Some((e, rest)) = external.split_first() {
                        if self.classifier.classify(e.as_ref()) == c
                            && self.accepts_from(a.to, input, classes, rest, run, require_final)
                        {
                            return true;
                        }
                    }
                    continue;
                }
                if input.is_empty() || a.input != Some(classes[0]) {
                    continue;
                }
                let tok = input[0].as_ref();
                let saved_run = run.clone();
                let rest_ext = match a.output {
                    Output::Eps => {
                        if classes[0] == SymbolClass::Piece {
                            run.push(tok.to_string());
                        }
                        Some(external)
                    }
                    Output::Copy => match external.split_first() {
                        Some((e, rest)) if e.as_ref() == tok => Some(rest),
                        _ => None,
                    },
                    Output::Word => {
                        run.push(tok.to_string());
                        let ok = match (self.join_run(run), external.split_first()) {
                            (Some(w), Some((e, rest))) if e.as_ref() == w => Some(rest),
                            _ => None,
                        };
                        run.clear();
                        ok
                    }
                    Output::Class(_) => None,
                };
                if let Some(rest) = rest_ext {
                    if self.accepts_from(a.to, &input[1..], &classes[1..], rest, run, require_final) {
                        return true;
                    }
                }
                *run = saved_run;
            }
        }
        false
    }

    /// One arc per line as `from internal external to`, then a blank line and
    /// the final states.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for a in &self.arcs {
            let input = a.input.map_or("<eps>", SymbolClass::name);
            let output = match a.output {
                Output::Eps => "<eps>",
                Output::Copy => input,
                Output::Word => "WORD",
                Output::Class(c) => c.name(),
            };
            let _ = writeln!(out, "{} {input} {output} {}", a.from, a.to);
        }
        out.push('\n');
        for (s, &f) in self.finals.iter().enumerate() {
            if f {
                let _ = writeln!(out, "{s}");
            }
        }
        out
    }
}

fn self_loops(arcs: &[(SymbolClass, Output)]) -> Vec<Arc> {
    arcs.iter()
        .map(|&(c, output)| Arc {
            from: 0,
            input: Some(c),
            output,
            to: 0,
        })
        .collect()
}

/// Deletes non-terminals (and brackets of linearized trees), copying
/// terminals, subword pieces and `</s>`.
pub fn build_syntax_to_plain(classifier: Classifier) -> MappingTransducer {
    use SymbolClass::*;
    let arcs = self_loops(&[
        (NonTerminal, Output::Eps),
        (RuleEnd, Output::Eps),
        (Open, Output::Eps),
        (Close, Output::Eps),
        (Terminal, Output::Copy),
        (Piece, Output::Copy),
        (Eos, Output::Copy),
    ]);
    MappingTransducer::new(1, 0, &[0], arcs, classifier, None).expect("static transducer is valid")
}

/// Deletes POS tags, copying words.
pub fn build_pos_to_plain(classifier: Classifier) -> MappingTransducer {
    use SymbolClass::*;
    let arcs = self_loops(&[
        (NonTerminal, Output::Eps),
        (Terminal, Output::Copy),
        (Piece, Output::Copy),
        (Eos, Output::Copy),
    ]);
    MappingTransducer::new(1, 0, &[0], arcs, classifier, None).expect("static transducer is valid")
}

/// Internal subword pieces to external whole words. Pieces carrying the
/// continuation marker write nothing; the final piece writes the word, which
/// must segment to exactly the run consumed.
pub fn build_word_to_bpe(model: &BpeModel) -> MappingTransducer {
    use SymbolClass::*;
    let arc = |from, input, output, to| Arc {
        from,
        input: Some(input),
        output,
        to,
    };
    let arcs = vec![
        arc(0, Terminal, Output::Word, 0),
        arc(0, Piece, Output::Eps, 1),
        arc(1, Piece, Output::Eps, 1),
        arc(1, Terminal, Output::Word, 0),
        arc(0, Eos, Output::Copy, 0),
    ];
    MappingTransducer::new(
        2,
        0,
        &[0],
        arcs,
        Classifier::lexical(model.marker()),
        Some(model.clone()),
    )
    .expect("static transducer is valid")
}

/// One synchronized internal hypothesis: a transducer state, the internal
/// prefix consumed so far and its cumulative model log-probability.
#[derive(Clone, Debug, PartialEq)]
pub struct SyncState {
    pub state: usize,
    pub internal_prefix: Vec<TokenId>,
    pub internal_logprob: f64,
    scorer_state: ScorerState,
    automaton: Option<WellformedAutomaton>,
}

impl SyncState {
    pub fn scorer_state(&self) -> &ScorerState {
        &self.scorer_state
    }
}

/// Best first; ties by internal prefix (lexicographic, so shorter first
/// among prefixes of each other), then state.
pub(crate) fn cmp_states(a: &SyncState, b: &SyncState) -> Ordering {
    b.internal_logprob
        .total_cmp(&a.internal_logprob)
        .then_with(|| a.internal_prefix.cmp(&b.internal_prefix))
        .then_with(|| a.state.cmp(&b.state))
}

/// A successor not yet materialized: `parent` extended by `token` (or by
/// nothing, for arcs that read nothing).
struct Pending<'s> {
    parent: &'s SyncState,
    token: Option<TokenId>,
    to: usize,
    logprob: f64,
    automaton: Option<WellformedAutomaton>,
}

impl Pending<'_> {
    fn cmp(&self, other: &Self) -> Ordering {
        let prefix = |p: &Self| {
            p.parent
                .internal_prefix
                .iter()
                .copied()
                .chain(p.token)
                .collect::<Vec<_>>()
        };
        other
            .logprob
            .total_cmp(&self.logprob)
            .then_with(|| prefix(self).cmp(&prefix(other)))
            .then_with(|| self.to.cmp(&other.to))
    }
}

/// A transducer bound to one internal model, with the model vocabulary
/// pre-partitioned by symbol class and next-token scores cached by prefix.
///
/// Not shareable across threads; build one per decoded sentence.
pub struct Synchronizer<'a> {
    transducer: &'a MappingTransducer,
    model: &'a dyn SequenceScorer,
    class_of: Vec<SymbolClass>,
    by_class: Vec<Vec<TokenId>>,
    constraint: Option<Representation>,
    cache: RefCell<HashMap<Vec<TokenId>, Rc<Vec<f64>>>>,
}

impl<'a> Synchronizer<'a> {
    pub fn new(transducer: &'a MappingTransducer, model: &'a dyn SequenceScorer) -> Self {
        let class_of: Vec<SymbolClass> = model
            .vocab()
            .tokens()
            .iter()
            .map(|t| transducer.classifier.classify(t))
            .collect();
        let mut by_class = vec![Vec::new(); SymbolClass::ALL.len()];
        for (id, &c) in class_of.iter().enumerate() {
            if id as TokenId != Vocab::BOS_ID {
                by_class[class_index(c)].push(id as TokenId);
            }
        }
        Synchronizer {
            transducer,
            model,
            class_of,
            by_class,
            constraint: None,
            cache: RefCell::new(HashMap::new()),
        }
    }

    /// Restricts internal sequences to well-formed outputs of `kind`.
    pub fn constrained(mut self, kind: Representation) -> Self {
        self.constraint = Some(kind);
        self
    }

    pub fn transducer(&self) -> &MappingTransducer {
        self.transducer
    }

    pub fn model(&self) -> &dyn SequenceScorer {
        self.model
    }

    pub fn start(&self) -> SyncState {
        SyncState {
            state: self.transducer.start,
            internal_prefix: Vec::new(),
            internal_logprob: 0.0,
            scorer_state: self.model.initial_state(),
            automaton: self.constraint.map(WellformedAutomaton::new),
        }
    }

    fn scores(&self, s: &SyncState) -> Rc<Vec<f64>> {
        if let Some(lp) = self.cache.borrow().get(&s.internal_prefix) {
            return lp.clone();
        }
        let lp = Rc::new(self.model.score_next(&s.scorer_state));
        self.cache
            .borrow_mut()
            .insert(s.internal_prefix.clone(), lp.clone());
        lp
    }

    /// Trailing subword pieces not yet covered by an emitted word.
    fn pending_run(&self, prefix: &[TokenId]) -> usize {
        prefix
            .iter()
            .rev()
            .take_while(|&&t| self.class_of[t as usize] == SymbolClass::Piece)
            .count()
    }

    fn run_strings(&self, prefix: &[TokenId], extra: TokenId) -> Vec<&str> {
        let vocab = self.model.vocab();
        let n = self.pending_run(prefix);
        prefix[prefix.len() - n..]
            .iter()
            .chain(std::iter::once(&extra))
            .map(|&t| vocab.token(t))
            .collect()
    }

    /// Whether consuming the silent `token` keeps the path able to write `external`.
    fn silent_ok(&self, prefix: &[TokenId], token: TokenId, external: &str) -> bool {
        if self.class_of[token as usize] != SymbolClass::Piece {
            return true;
        }
        let Some(model) = &self.transducer.segmenter else {
            return true;
        };
        let run = self.run_strings(prefix, token);
        let expected = model.segment(external);
        run.len() < expected.len() && expected.iter().zip(&run).all(|(e, r)| e == r)
    }

    fn emits(&self, prefix: &[TokenId], token: TokenId, output: Output, external: &str) -> bool {
        match output {
            Output::Eps | Output::Class(_) => false,
            Output::Copy => self.model.vocab().token(token) == external,
            Output::Word => {
                let run = self.run_strings(prefix, token);
                self.transducer.join_run(&run).as_deref() == Some(external)
            }
        }
    }

    fn materialize(&self, p: Pending<'_>) -> SyncState {
        let parent = p.parent;
        match p.token {
            None => SyncState {
                state: p.to,
                internal_prefix: parent.internal_prefix.clone(),
                internal_logprob: p.logprob,
                scorer_state: parent.scorer_state.clone(),
                automaton: p.automaton,
            },
            Some(tok) => {
                let mut internal_prefix = parent.internal_prefix.clone();
                internal_prefix.push(tok);
                SyncState {
                    state: p.to,
                    internal_prefix,
                    internal_logprob: p.logprob,
                    scorer_state: self.model.advance(&parent.scorer_state, tok),
                    automaton: p.automaton,
                }
            }
        }
    }

    /// Successors of `s` that consume up to `expansion_cap` silent internal
    /// symbols and then either exactly one internal symbol writing `external`
    /// or nothing at all through an arc writing `external`'s class. Best first.
    ///
    /// At most `inner_beam` successors are returned, and the silent frontier
    /// is pruned to the same width after each expansion.
    pub fn advance(
        &self,
        s: &SyncState,
        external: &str,
        expansion_cap: usize,
        inner_beam: usize,
    ) -> Vec<SyncState> {
        let external_class = self.transducer.classifier.classify(external);
        let mut layers: Vec<Vec<SyncState>> = vec![vec![s.clone()]];
        let mut found: Vec<SyncState> = Vec::new();
        for depth in 0..=expansion_cap {
            let frontier = layers.last().expect("non-empty");
            let mut next: Vec<Pending> = Vec::new();
            let mut hits: Vec<Pending> = Vec::new();
            for f in frontier {
                let lp = self.scores(f);
                for &q in &self.transducer.closure[f.state] {
                    for &ai in &self.transducer.by_state[q] {
                        let arc = &self.transducer.arcs[ai];
                        let Some(class) = arc.input else {
                            if arc.output == Output::Class(external_class) {
                                hits.push(Pending {
                                    parent: f,
                                    token: None,
                                    to: arc.to,
                                    logprob: f.internal_logprob,
                                    automaton: f.automaton.clone(),
                                });
                            }
                            continue;
                        };
                        let automaton = match &f.automaton {
                            Some(a) => match a.step(class) {
                                Some(next) => Some(next),
                                None => continue,
                            },
                            None => None,
                        };
                        let silent = arc.output == Output::Eps;
                        if silent && depth == expansion_cap {
                            continue;
                        }
                        for &tok in &self.by_class[class_index(class)] {
                            let l = lp[tok as usize];
                            if l == f64::NEG_INFINITY {
                                continue;
                            }
                            let keep = if silent {
                                self.silent_ok(&f.internal_prefix, tok, external)
                            } else {
                                self.emits(&f.internal_prefix, tok, arc.output, external)
                            };
                            if !keep {
                                continue;
                            }
                            let p = Pending {
                                parent: f,
                                token: Some(tok),
                                to: arc.to,
                                logprob: f.internal_logprob + l,
                                automaton: automaton.clone(),
                            };
                            if silent {
                                next.push(p);
                            } else {
                                hits.push(p);
                            }
                        }
                    }
                }
            }
            hits.sort_by(|a, b| a.cmp(b));
            hits.truncate(inner_beam);
            found.extend(hits.into_iter().map(|p| self.materialize(p)));
            if next.is_empty() {
                break;
            }
            next.sort_by(|a, b| a.cmp(b));
            next.truncate(inner_beam);
            let layer: Vec<SyncState> = next.into_iter().map(|p| self.materialize(p)).collect();
            layers.push(layer);
        }
        found.sort_by(cmp_states);
        found.dedup_by(|a, b| a.state == b.state && a.internal_prefix == b.internal_prefix);
        found.truncate(inner_beam);
        found
    }

    /// Whether `s` can end here: its state is final, no subword run is
    /// pending, and the model either already consumed `</s>` or gives it
    /// non-zero probability.
    pub fn is_final_synced(&self, s: &SyncState) -> bool {
        if !self.transducer.is_final(s.state) || self.pending_run(&s.internal_prefix) > 0 {
            return false;
        }
        if let Some(a) = &s.automaton {
            if !a.is_complete() {
                return false;
            }
        }
        s.internal_prefix.last() == Some(&Vocab::EOS_ID)
            || self.scores(s)[Vocab::EOS_ID as usize] > f64::NEG_INFINITY
    }
}

fn class_index(c: SymbolClass) -> usize {
    SymbolClass::ALL
        .iter()
        .position(|&x| x == c)
        .expect("ALL lists every class")
}

/// One-shot form of [`Synchronizer::advance`].
pub fn advance(
    transducer: &MappingTransducer,
    s: &SyncState,
    external: &str,
    model: &dyn SequenceScorer,
    expansion_cap: usize,
    inner_beam: usize,
) -> Vec<SyncState> {
    Synchronizer::new(transducer, model).advance(s, external, expansion_cap, inner_beam)
}

pub fn is_final_synced(transducer: &MappingTransducer, s: &SyncState, model: &dyn SequenceScorer) -> bool {
    Synchronizer::new(transducer, model).is_final_synced(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scorers::{DeterministicScorer, SyntheticScorer, UniformScorer};
    use crate::subword::learn_bpe_default;

    fn toks(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    fn table1_classifier() -> Classifier {
        Classifier::new(["ROOT", "S", "NP", "VP", "DT", "NNS", "VBD", "NN"], "@@")
    }

    const ROW4: &str = "S</R> NP VP</R> DT NNS</R> No complications VBD</R> occurred";

    #[test]
    fn deletion_projections() {
        let t = build_syntax_to_plain(table1_classifier());
        assert_eq!(t.project(&toks("NN</R> dog")).unwrap(), toks("dog"));
        assert_eq!(t.project(&toks(ROW4)).unwrap(), toks("No complications occurred"));
        let lin_tree = "(ROOT (S (NP (DT No ) (NNS complications ) ) (VP (VBD occurred ) ) ) )";
        assert_eq!(t.project(&toks(lin_tree)).unwrap(), toks("No complications occurred"));
        let p = build_pos_to_plain(table1_classifier());
        assert_eq!(
            p.project(&toks("DT No NNS complications VBD occurred")).unwrap(),
            toks("No complications occurred")
        );
        assert_eq!(p.project(&toks("NN dog")).unwrap(), toks("dog"));
        assert_eq!(p.project(&toks("NN</R> dog")), None);
    }

    #[test]
    fn word_to_bpe_accepts_only_the_model_segmentation() {
        let m = learn_bpe_default(&["low low low lower lower"], 2).unwrap();
        let t = build_word_to_bpe(&m);
        assert_eq!(t.project(&toks("low@@ e@@ r")).unwrap(), toks("lower"));
        assert_eq!(t.project(&toks("low")).unwrap(), toks("low"));
        assert!(t.accepts(&toks("low@@ e@@ r"), &toks("lower"), true));
        // a valid spelling but not the segmenter's
        assert!(!t.accepts(&toks("l@@ ow"), &toks("low"), true));
        assert!(!t.accepts(&toks("low@@"), &Vec::<&str>::new(), true));
        assert!(t.accepts(&toks("low@@"), &Vec::<&str>::new(), false));
        assert_eq!(t.invert().unwrap_err(), TransducerError::NotInvertible);
    }

    #[test]
    fn text_dump() {
        let t = build_pos_to_plain(table1_classifier());
        assert_eq!(
            t.to_text(),
            "0 NONTERMINAL <eps> 0\n0 TERMINAL TERMINAL 0\n0 PIECE PIECE 0\n0 EOS EOS 0\n\n0\n"
        );
        assert!(t.invert().unwrap().to_text().starts_with("0 <eps> NONTERMINAL 0\n"));
    }

    #[test]
    fn invalid_arcs_rejected() {
        let lex = Classifier::lexical("@@");
        let arcs = vec![
            Arc { from: 0, input: None, output: Output::Eps, to: 1 },
            Arc { from: 1, input: None, output: Output::Eps, to: 0 },
        ];
        assert!(matches!(
            MappingTransducer::new(2, 0, &[0], arcs, lex.clone(), None),
            Err(TransducerError::EpsilonCycle { .. })
        ));
        let arcs = vec![Arc { from: 0, input: None, output: Output::Copy, to: 0 }];
        assert!(MappingTransducer::new(1, 0, &[0], arcs, lex.clone(), None).is_err());
        let arcs = vec![Arc { from: 0, input: Some(SymbolClass::Terminal), output: Output::Copy, to: 3 }];
        assert!(matches!(
            MappingTransducer::new(1, 0, &[0], arcs, lex, None),
            Err(TransducerError::BadState { state: 3, .. })
        ));
    }

    #[test]
    fn deterministic_model_syncs_to_its_sequence() {
        let t = build_syntax_to_plain(table1_classifier());
        let vocab = Vocab::from_tokens(toks(ROW4).into_iter().chain(["NN</R>", "dog", "NP</R>"]));
        let target = vocab.encode(&toks(ROW4)).unwrap();
        let model = DeterministicScorer::new(vocab.clone(), &target);
        let sync = Synchronizer::new(&t, &model);
        let mut beam = vec![sync.start()];
        for w in toks("No complications occurred </s>") {
            beam = sync.advance(&beam[0], w, DEFAULT_EXPANSION_CAP, 4);
            assert!(!beam.is_empty(), "died at {w}");
        }
        let best = &beam[0];
        assert_eq!(vocab.decode(&best.internal_prefix[..target.len()]), toks(ROW4));
        assert_eq!(best.internal_logprob, 0.0);
        assert!(sync.is_final_synced(best));
    }

    #[test]
    fn inverted_deletion_syncs_plain_internal_to_syntax_external() {
        let t = build_syntax_to_plain(table1_classifier()).invert().unwrap();
        let vocab = Vocab::from_tokens(["No", "complications", "occurred"]);
        let target = vocab.encode(&toks("No complications occurred")).unwrap();
        let model = DeterministicScorer::new(vocab.clone(), &target);
        let sync = Synchronizer::new(&t, &model);
        let mut s = sync.start();
        for w in toks(ROW4).into_iter().chain(["</s>"]) {
            let out = sync.advance(&s, w, DEFAULT_EXPANSION_CAP, 4);
            assert_eq!(out.len(), 1, "at {w}");
            s = out.into_iter().next().unwrap();
        }
        assert_eq!(vocab.decode(&s.internal_prefix), toks("No complications occurred </s>"));
        assert!(t.accepts(&toks("No complications occurred"), &toks(ROW4), true));
    }

    #[test]
    fn single_word_example() {
        let t = build_syntax_to_plain(table1_classifier());
        let vocab = Vocab::from_tokens(["NN</R>", "dog", "S</R>"]);
        let model = DeterministicScorer::new(vocab.clone(), &vocab.encode(&["NN</R>", "dog"]).unwrap());
        let out = advance(&t, &Synchronizer::new(&t, &model).start(), "dog", &model, 10, 4);
        assert_eq!(out.len(), 1);
        assert_eq!(vocab.decode(&out[0].internal_prefix), ["NN</R>", "dog"]);
    }

    #[test]
    fn expansion_cap_bounds_silent_symbols() {
        let t = build_syntax_to_plain(table1_classifier());
        let vocab = Vocab::from_tokens(["NP", "dog"]);
        let model = UniformScorer::new(vocab.clone());
        let sync = Synchronizer::new(&t, &model);
        for cap in 0..4 {
            let out = sync.advance(&sync.start(), "dog", cap, 100);
            assert_eq!(out.len(), cap + 1);
            assert!(out.iter().all(|s| s.internal_prefix.len() <= cap + 1));
        }
        // best first: fewer uniform-cost symbols is more probable
        let out = sync.advance(&sync.start(), "dog", 3, 100);
        assert_eq!(out[0].internal_prefix.len(), 1);
        assert!(sync.advance(&sync.start(), "cat", 3, 100).is_empty());
    }

    #[test]
    fn constraint_masks_internal_symbols() {
        let cls = Classifier::new(["S", "NP"], "@@");
        let t = build_syntax_to_plain(cls);
        let vocab = Vocab::from_tokens(["S</R>", "NP", "NP</R>", "dog"]);
        let model = UniformScorer::new(vocab.clone());
        let sync = Synchronizer::new(&t, &model).constrained(Representation::LinearDerivation);
        // the root needs a rule body before any word
        let out = sync.advance(&sync.start(), "dog", 4, 100);
        assert!(!out.is_empty());
        for s in &out {
            let toks = vocab.decode(&s.internal_prefix);
            assert!(toks[0].ends_with("</R>") || toks[0] == "NP", "{toks:?}");
        }
        let eos = sync.advance(&out[0], "</s>", 0, 100);
        assert_eq!(eos.len(), 1);
        assert!(sync.is_final_synced(&eos[0]));
    }

    #[test]
    fn mid_word_state_is_not_final() {
        let m = learn_bpe_default(&["low low low lower lower"], 2).unwrap();
        let t = build_word_to_bpe(&m);
        let vocab = Vocab::from_tokens(["low@@", "e@@", "r", "low"]);
        let model = UniformScorer::new(vocab.clone());
        let sync = Synchronizer::new(&t, &model);
        let start = sync.start();
        assert!(sync.is_final_synced(&start));
        let out = sync.advance(&start, "lower", 10, 8);
        assert_eq!(out.len(), 1);
        assert_eq!(vocab.decode(&out[0].internal_prefix), ["low@@", "e@@", "r"]);
        assert!(sync.is_final_synced(&out[0]));
        let mut mid = start.clone();
        mid.internal_prefix = vocab.encode(&["low@@"]).unwrap();
        mid.state = 1;
        assert!(!sync.is_final_synced(&mid));
    }

    #[test]
    fn successors_are_real_paths() {
        let cls = Classifier::new(["A", "B"], "@@");
        let t = build_syntax_to_plain(cls);
        let vocab = Vocab::from_tokens(["A", "B</R>", "x", "y"]);
        let model = SyntheticScorer::new(vocab.clone(), 3);
        let sync = Synchronizer::new(&t, &model);
        let ext = ["x", "y", "x"];
        let mut beam = vec![sync.start()];
        for (j, w) in ext.iter().enumerate() {
            beam = beam.iter().flat_map(|s| sync.advance(s, w, 3, 6)).collect();
            assert!(!beam.is_empty());
            for s in &beam {
                let internal = vocab.decode(&s.internal_prefix);
                assert!(t.accepts(&internal, &ext[..=j], false));
                let expect = model.score_sequence(&s.internal_prefix);
                assert!((s.internal_logprob - expect).abs() < 1e-9);
            }
        }
    }
}
