//! Constituency trees and their flat target-side representations.
//!
//! | representation        | example                                              |
//! |-----------------------|------------------------------------------------------|
//! | plain text            | `No complications occurred`                          |
//! | linearized tree       | `(ROOT (S (NP (DT No ) ... ) ) )`                    |
//! | derivation            | `ROOT→S ; S→NP VP ; ...`                             |
//! | linearized derivation | `S</R> NP VP</R> DT NNS</R> No complications ...`    |
//! | POS/plain text        | `DT No NNS complications VBD occurred`               |

mod derivation;
mod generator;
mod ptb;
mod tree;

use std::collections::BTreeSet;

use thiserror::Error;

pub use derivation::{
    derivation_to_linear, linear_to_derivation, tree_to_derivation, Derivation, Rhs, Rule,
};
pub use generator::TreeGenerator;
pub use ptb::{delinearize_tokens, delinearize_tree, linearize_tree, parse_ptb, render_ptb};
pub use tree::Tree;

use crate::tokens::{Classifier, Representation, SymbolClass, TokenSeq};

/// Default root label for derivation reconstruction.
pub const DEFAULT_ROOT: &str = "ROOT";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TreeError {
    #[error("unbalanced brackets at byte {offset}")]
    Unbalanced { offset: usize },
    #[error("expected {what} at byte {offset}")]
    Expected { what: &'static str, offset: usize },
    #[error("node `{label}` mixes terminals and non-terminals (byte {offset})")]
    MixedRule { label: String, offset: usize },
    #[error("node `{label}` has no children (byte {offset})")]
    EmptyNodeAt { label: String, offset: usize },
    #[error("node `{label}` has no children")]
    EmptyNode { label: String },
    #[error("invalid symbol `{label}` at byte {offset}")]
    InvalidLabelAt { label: String, offset: usize },
    #[error("invalid symbol `{symbol}`")]
    InvalidSymbol { symbol: String },
    #[error("trailing input after the tree at byte {offset}")]
    TrailingInput { offset: usize },
    #[error("token {index}: {reason}")]
    TokenAt { index: usize, reason: &'static str },
    #[error("rule {index}: {reason}")]
    RuleAt { index: usize, reason: &'static str },
}

/// Leaf tokens, left to right.
pub fn tree_to_plain(tree: &Tree) -> TokenSeq {
    TokenSeq::new(
        Representation::PlainText,
        tree.leaves().into_iter().map(str::to_string).collect(),
    )
}

/// Each preterminal's tag followed by its leaf tokens.
pub fn tree_to_pos_text(tree: &Tree) -> TokenSeq {
    let mut tokens = Vec::with_capacity(tree.leaf_count() + tree.preterminal_count());
    tree.visit_preterminals(&mut |tag, leaves| {
        tokens.push(tag.to_string());
        tokens.extend(leaves.iter().cloned());
    });
    TokenSeq::new(Representation::PosText, tokens)
}

/// Linearized derivation of a tree.
pub fn tree_to_linear_derivation(tree: &Tree) -> TokenSeq {
    derivation_to_linear(&tree_to_derivation(tree))
}

pub fn linear_derivation_to_tree(
    seq: &TokenSeq,
    root: &str,
    classes: &Classifier,
) -> Result<Tree, TreeError> {
    linear_to_derivation(seq, root, classes)?.to_tree()
}

/// Deletes the syntactic material of a representation, leaving plain text.
///
/// Linearized trees drop bracket tokens; linearized derivations drop label
/// and `</R>` tokens; POS text is read positionally (a tag, then one word's
/// pieces) so it needs no label inventory.
pub fn strip_to_plain(seq: &TokenSeq, classes: &Classifier) -> Result<TokenSeq, TreeError> {
    let tokens = match seq.kind {
        Representation::PlainText => seq.tokens.clone(),
        Representation::LinearTree => seq
            .tokens
            .iter()
            .filter(|t| !matches!(classes.classify(t), SymbolClass::Open | SymbolClass::Close))
            .cloned()
            .collect(),
        Representation::LinearDerivation => seq
            .tokens
            .iter()
            .filter(|t| {
                !matches!(
                    classes.classify(t),
                    SymbolClass::NonTerminal | SymbolClass::RuleEnd
                )
            })
            .cloned()
            .collect(),
        Representation::PosText => {
            let marker = classes.marker();
            let is_piece = |t: &str| !marker.is_empty() && t.len() > marker.len() && t.ends_with(marker);
            let mut out = Vec::new();
            let mut in_word = false;
            for tok in &seq.tokens {
                if !in_word {
                    in_word = true;
                    continue;
                }
                out.push(tok.clone());
                in_word = is_piece(tok);
            }
            if in_word {
                return Err(TreeError::TokenAt {
                    index: seq.tokens.len(),
                    reason: "POS text ends with a tag or inside a word",
                });
            }
            out
        }
    };
    Ok(TokenSeq::new(Representation::PlainText, tokens))
}

/// Every label used in the trees (phrase labels and POS tags).
pub fn label_inventory<'a, I: IntoIterator<Item = &'a Tree>>(trees: I) -> BTreeSet<String> {
    trees
        .into_iter()
        .flat_map(|t| t.labels())
        .map(str::to_string)
        .collect()
}

/// Mean sequence lengths of the four flat representations over a corpus.
#[derive(Clone, Debug, PartialEq)]
pub struct LengthStats {
    pub sentences: usize,
    pub plain: f64,
    pub linear_tree: f64,
    pub linear_derivation: f64,
    pub pos_text: f64,
}

impl LengthStats {
    /// Lengths without an end-of-sentence token.
    pub fn compute(trees: &[Tree]) -> LengthStats {
        let n = trees.len().max(1) as f64;
        let mean = |f: &dyn Fn(&Tree) -> usize| trees.iter().map(f).sum::<usize>() as f64 / n;
        LengthStats {
            sentences: trees.len(),
            plain: mean(&|t| t.leaf_count()),
            linear_tree: mean(&|t| 2 * t.internal_count() + t.leaf_count()),
            linear_derivation: mean(&|t| tree_to_linear_derivation(t).len()),
            pos_text: mean(&|t| t.leaf_count() + t.preterminal_count()),
        }
    }

    /// The same means counting one end-of-sentence token per sentence.
    pub fn with_eos(&self) -> LengthStats {
        let add = if self.sentences > 0 { 1.0 } else { 0.0 };
        LengthStats {
            sentences: self.sentences,
            plain: self.plain + add,
            linear_tree: self.linear_tree + add,
            linear_derivation: self.linear_derivation + add,
            pos_text: self.pos_text + add,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const T0: &str = "(ROOT (S (NP (DT No ) (NNS complications ) ) (VP (VBD occurred ) ) ) )";

    #[test]
    fn table_rows_one_and_five() {
        let t = parse_ptb(T0).unwrap();
        assert_eq!(tree_to_plain(&t).to_string(), "No complications occurred");
        assert_eq!(
            tree_to_pos_text(&t).to_string(),
            "DT No NNS complications VBD occurred"
        );
        let m = parse_ptb("(ROOT (NN dog ) )").unwrap();
        assert_eq!(tree_to_plain(&m).to_string(), "dog");
        assert_eq!(tree_to_pos_text(&m).to_string(), "NN dog");
    }

    #[test]
    fn strip_each_representation() {
        let t = parse_ptb("(ROOT (S (NP (DT No ) (NNS compli@@ cations ) ) (VP (VBD occurred ) ) ) )")
            .unwrap();
        let classes = Classifier::new(label_inventory([&t]), "@@");
        let plain = tree_to_plain(&t);
        assert_eq!(strip_to_plain(&linearize_tree(&t), &classes).unwrap(), plain);
        assert_eq!(
            strip_to_plain(&tree_to_linear_derivation(&t), &classes).unwrap(),
            plain
        );
        assert_eq!(strip_to_plain(&tree_to_pos_text(&t), &classes).unwrap(), plain);
    }

    #[test]
    fn pos_strip_rejects_truncation() {
        let c = Classifier::lexical("@@");
        assert!(strip_to_plain(&TokenSeq::parse(Representation::PosText, "NN"), &c).is_err());
        assert!(strip_to_plain(&TokenSeq::parse(Representation::PosText, "NN lo@@"), &c).is_err());
        assert!(strip_to_plain(&TokenSeq::parse(Representation::PosText, "NN lo@@ w"), &c).is_ok());
    }

    #[test]
    fn length_stats_on_example() {
        let t = parse_ptb(T0).unwrap();
        let s = LengthStats::compute(&[t]);
        assert_eq!(s.plain, 3.0);
        assert_eq!(s.pos_text, 6.0);
        assert_eq!(s.linear_derivation, 9.0);
        assert_eq!(s.linear_tree, 17.0);
        assert_eq!(s.with_eos().plain, 4.0);
    }
}
