//! Prefix automata that admit exactly the token-class sequences of
//! well-formed outputs, used as hard masks during decoding.

use crate::tokens::{Representation, SymbolClass};

/// An open node of a linearized tree.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Node {
    /// Just opened; no children yet.
    Fresh,
    /// Has at least one child bracket.
    Phrase,
    /// Preterminal mid-word (last token was a continuation piece).
    MidWord,
    /// Preterminal holding its complete word.
    Word,
}

/// Where a linearized derivation is relative to rule bodies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Run {
    /// At a rule boundary.
    Idle,
    /// Inside a run of right-hand-side non-terminals, `n` read so far.
    NonTerminals(usize),
    /// Inside the subword pieces of a word.
    Pieces,
}

/// Position of a prefix within the well-formed language of its representation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WellformedAutomaton {
    /// Plain text: words, with subword runs that must end in a whole piece.
    Plain { mid_word: bool, done: bool },
    /// Tag-word pairs.
    Pos { after_tag: bool, done: bool },
    /// Bracketed tree; `stack` holds the open nodes.
    Tree { stack: Vec<Node>, started: bool, done: bool },
    /// Leftmost derivation; `pending` non-terminals still await expansion,
    /// the first of which is the unexpanded root while `at_root`.
    Derivation { pending: usize, run: Run, at_root: bool, done: bool },
}

impl WellformedAutomaton {
    pub fn new(kind: Representation) -> Self {
        match kind {
            Representation::PlainText => WellformedAutomaton::Plain {
                mid_word: false,
                done: false,
            },
            Representation::PosText => WellformedAutomaton::Pos {
                after_tag: false,
                done: false,
            },
            Representation::LinearTree => WellformedAutomaton::Tree {
                stack: Vec::new(),
                started: false,
                done: false,
            },
            Representation::LinearDerivation => WellformedAutomaton::Derivation {
                pending: 1,
                run: Run::Idle,
                at_root: true,
                done: false,
            },
        }
    }

    pub fn allows(&self, class: SymbolClass) -> bool {
        self.step(class).is_some()
    }

    /// Every class allowed next, in declaration order.
    pub fn allowed(&self) -> Vec<SymbolClass> {
        SymbolClass::ALL
            .iter()
            .copied()
            .filter(|&c| self.allows(c))
            .collect()
    }

    /// Whether the prefix is a complete output (`</s>` already read or allowed).
    pub fn is_complete(&self) -> bool {
        self.is_done() || self.allows(SymbolClass::Eos)
    }

    fn is_done(&self) -> bool {
        match *self {
            WellformedAutomaton::Plain { done, .. }
            | WellformedAutomaton::Pos { done, .. }
            | WellformedAutomaton::Tree { done, .. }
            | WellformedAutomaton::Derivation { done, .. } => done,
        }
    }

    /// The automaton after reading one more token of class `class`.
    pub fn step(&self, class: SymbolClass) -> Option<Self> {
        use SymbolClass::*;
        if self.is_done() || class == Bos {
            return None;
        }
        match self.clone() {
            WellformedAutomaton::Plain { mid_word, .. } => match class {
                Piece => Some(WellformedAutomaton::Plain {
                    mid_word: true,
                    done: false,
                }),
                Terminal => Some(WellformedAutomaton::Plain {
                    mid_word: false,
                    done: false,
                }),
                Eos if !mid_word => Some(WellformedAutomaton::Plain {
                    mid_word: false,
                    done: true,
                }),
                _ => None,
            },
            WellformedAutomaton::Pos { after_tag, .. } => {
                let next = |after_tag, done| WellformedAutomaton::Pos { after_tag, done };
                match class {
                    NonTerminal if !after_tag => Some(next(true, false)),
                    Piece if after_tag => Some(next(true, false)),
                    Terminal if after_tag => Some(next(false, false)),
                    Eos if !after_tag => Some(next(false, true)),
                    _ => None,
                }
            }
            WellformedAutomaton::Tree {
                mut stack, started, ..
            } => {
                let top = stack.last().copied();
                match class {
                    Open => {
                        if started && stack.is_empty() {
                            return None;
                        }
                        match top {
                            None => {}
                            Some(Node::Fresh) | Some(Node::Phrase) => {
                                *stack.last_mut().expect("non-empty") = Node::Phrase;
                            }
                            Some(_) => return None,
                        }
                        stack.push(Node::Fresh);
                    }
                    Piece | Terminal => {
                        let mid = class == Piece;
                        match top {
                            Some(Node::Fresh) | Some(Node::MidWord) => {
                                *stack.last_mut().expect("non-empty") =
                                    if mid { Node::MidWord } else { Node::Word };
                            }
                            _ => return None,
                        }
                    }
                    Close => match top {
                        Some(Node::Phrase) | Some(Node::Word) => {
                            stack.pop();
                        }
                        _ => return None,
                    },
                    Eos => {
                        if !(started && stack.is_empty()) {
                            return None;
                        }
                        return Some(WellformedAutomaton::Tree {
                            stack,
                            started,
                            done: true,
                        });
                    }
                    _ => return None,
                }
                Some(WellformedAutomaton::Tree {
                    stack,
                    started: true,
                    done: false,
                })
            }
            WellformedAutomaton::Derivation {
                pending,
                run,
                at_root,
                ..
            } => {
                let next = |pending, run, at_root, done| WellformedAutomaton::Derivation {
                    pending,
                    run,
                    at_root,
                    done,
                };
                match (run, class) {
                    (Run::Idle, NonTerminal) if pending > 0 => {
                        Some(next(pending, Run::NonTerminals(1), at_root, false))
                    }
                    (Run::NonTerminals(n), NonTerminal) => {
                        Some(next(pending, Run::NonTerminals(n + 1), at_root, false))
                    }
                    // the rule body closes: its head is expanded, its n
                    // right-hand-side symbols become pending
                    (Run::Idle, RuleEnd) if pending > 0 => {
                        Some(next(pending, Run::Idle, false, false))
                    }
                    (Run::NonTerminals(n), RuleEnd) => {
                        Some(next(pending + n, Run::Idle, false, false))
                    }
                    (Run::Idle, Piece) if pending > 0 && !at_root => {
                        Some(next(pending, Run::Pieces, false, false))
                    }
                    (Run::Pieces, Piece) => Some(next(pending, Run::Pieces, false, false)),
                    (Run::Idle, Terminal) | (Run::Pieces, Terminal) if pending > 0 && !at_root => {
                        Some(next(pending - 1, Run::Idle, false, false))
                    }
                    (Run::Idle, Eos) if pending == 0 => Some(next(0, Run::Idle, false, true)),
                    _ => None,
                }
            }
        }
    }

    /// Fewest further tokens, not counting `</s>`, that complete the output.
    pub fn min_to_complete(&self) -> usize {
        match self {
            WellformedAutomaton::Plain { mid_word, .. } => usize::from(*mid_word),
            WellformedAutomaton::Pos { after_tag, .. } => usize::from(*after_tag),
            WellformedAutomaton::Tree {
                stack,
                started,
                done,
            } => {
                if *done {
                    0
                } else if !started {
                    // `(X w )`
                    3
                } else {
                    stack
                        .iter()
                        .map(|n| match n {
                            Node::Fresh | Node::MidWord => 2,
                            Node::Phrase | Node::Word => 1,
                        })
                        .sum()
                }
            }
            WellformedAutomaton::Derivation {
                pending,
                run,
                at_root,
                done,
            } => {
                if *done {
                    return 0;
                }
                match run {
                    // the root needs one rule body and one word at least
                    Run::Idle if *at_root => pending + 1,
                    Run::Idle | Run::Pieces => *pending,
                    // close the body, then one word per body symbol
                    Run::NonTerminals(n) => 1 + (n + 1) + (pending - 1),
                }
            }
        }
    }
}

/// Classes allowed after `prefix`, or `None` if the prefix is itself
/// not a prefix of any well-formed output.
pub fn wellformed_mask(kind: Representation, prefix: &[SymbolClass]) -> Option<Vec<SymbolClass>> {
    let mut a = WellformedAutomaton::new(kind);
    for &c in prefix {
        a = a.step(c)?;
    }
    Some(a.allowed())
}
