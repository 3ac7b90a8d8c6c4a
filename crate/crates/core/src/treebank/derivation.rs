//! Leftmost derivations and their `</R>`-marked linearization.

use std::collections::HashSet;
use std::fmt;

use super::{Tree, TreeError};
use crate::tokens::{Classifier, Representation, SymbolClass, TokenSeq, RULE_END};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Rhs {
    NonTerminals(Vec<String>),
    Terminals(Vec<String>),
}

impl Rhs {
    pub fn symbols(&self) -> &[String] {
        match self {
            Rhs::NonTerminals(s) | Rhs::Terminals(s) => s,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Rule {
    pub lhs: String,
    pub rhs: Rhs,
}

/// Rules in leftmost (pre-order) application order.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Derivation {
    pub rules: Vec<Rule>,
}

impl Derivation {
    pub fn root(&self) -> Option<&str> {
        self.rules.first().map(|r| r.lhs.as_str())
    }

    /// Applies the rules leftmost-first to rebuild the tree.
    pub fn to_tree(&self) -> Result<Tree, TreeError> {
        fn build<'a, I: Iterator<Item = (usize, &'a Rule)>>(
            label: &str,
            rules: &mut I,
        ) -> Result<Tree, TreeError> {
            let (index, rule) = rules.next().ok_or(TreeError::RuleAt {
                index: usize::MAX,
                reason: "derivation ended with pending non-terminals",
            })?;
            if rule.lhs != label {
                return Err(TreeError::RuleAt {
                    index,
                    reason: "lhs is not the leftmost pending non-terminal",
                });
            }
            match &rule.rhs {
                Rhs::Terminals(words) => Tree::preterminal(label, words.clone()),
                Rhs::NonTerminals(symbols) => {
                    let children = symbols
                        .iter()
                        .map(|s| build(s, rules))
                        .collect::<Result<Vec<_>, _>>()?;
                    Tree::phrase(label, children)
                }
            }
        }
        let root = self.root().ok_or(TreeError::RuleAt {
            index: 0,
            reason: "empty derivation",
        })?;
        let mut rules = self.rules.iter().enumerate();
        let tree = build(root, &mut rules).map_err(|e| match e {
            TreeError::RuleAt {
                index: usize::MAX,
                reason,
            } => TreeError::RuleAt {
                index: self.rules.len(),
                reason,
            },
            e => e,
        })?;
        if let Some((index, _)) = rules.next() {
            return Err(TreeError::RuleAt {
                index,
                reason: "rules left over after the tree is complete",
            });
        }
        Ok(tree)
    }

    /// Parses `ROOT→S ; S→NP VP ; ...` (`->` is accepted too). A right-hand
    /// symbol is a non-terminal iff it is the lhs of some rule.
    pub fn parse(text: &str) -> Result<Derivation, TreeError> {
        let mut raw = Vec::new();
        for (index, part) in text.split(';').enumerate() {
            let part = part.trim();
            let (lhs, rhs) = part
                .split_once('→')
                .or_else(|| part.split_once("->"))
                .ok_or(TreeError::RuleAt {
                    index,
                    reason: "expected `LHS→RHS`",
                })?;
            let lhs = lhs.trim().to_string();
            let rhs: Vec<String> = rhs.split_whitespace().map(str::to_string).collect();
            if lhs.is_empty() || rhs.is_empty() {
                return Err(TreeError::RuleAt {
                    index,
                    reason: "empty side of rule",
                });
            }
            raw.push((lhs, rhs));
        }
        let lhs_set: HashSet<&str> = raw.iter().map(|(l, _)| l.as_str()).collect();
        let mut rules = Vec::with_capacity(raw.len());
        for (index, (lhs, rhs)) in raw.iter().enumerate() {
            let nt = rhs.iter().filter(|s| lhs_set.contains(s.as_str())).count();
            let rhs = if nt == rhs.len() {
                Rhs::NonTerminals(rhs.clone())
            } else if nt == 0 {
                Rhs::Terminals(rhs.clone())
            } else {
                return Err(TreeError::RuleAt {
                    index,
                    reason: "mixed terminal/non-terminal right-hand side",
                });
            };
            rules.push(Rule {
                lhs: lhs.clone(),
                rhs,
            });
        }
        Ok(Derivation { rules })
    }
}

impl fmt::Display for Derivation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, rule) in self.rules.iter().enumerate() {
            if i > 0 {
                f.write_str(" ; ")?;
            }
            write!(f, "{}→{}", rule.lhs, rule.rhs.symbols().join(" "))?;
        }
        Ok(())
    }
}

/// Leftmost derivation: one rule per labelled node, pre-order.
pub fn tree_to_derivation(tree: &Tree) -> Derivation {
    fn walk(tree: &Tree, rules: &mut Vec<Rule>) {
        match tree {
            Tree::Phrase { label, children } => {
                rules.push(Rule {
                    lhs: label.clone(),
                    rhs: Rhs::NonTerminals(children.iter().map(|c| c.label().to_string()).collect()),
                });
                for c in children {
                    walk(c, rules);
                }
            }
            Tree::Preterminal { tag, leaves } => rules.push(Rule {
                lhs: tag.clone(),
                rhs: Rhs::Terminals(leaves.clone()),
            }),
        }
    }
    let mut rules = Vec::with_capacity(tree.internal_count());
    walk(tree, &mut rules);
    Derivation { rules }
}

/// Concatenates rule bodies; the last symbol of a non-terminal body is
/// fused with `</R>`. The root label is not emitted.
pub fn derivation_to_linear(deriv: &Derivation) -> TokenSeq {
    let mut tokens = Vec::new();
    for rule in &deriv.rules {
        match &rule.rhs {
            Rhs::Terminals(words) => tokens.extend(words.iter().cloned()),
            Rhs::NonTerminals(symbols) => {
                let (last, init) = symbols.split_last().expect("rule body is non-empty");
                tokens.extend(init.iter().cloned());
                tokens.push(format!("{last}{RULE_END}"));
            }
        }
    }
    TokenSeq::new(Representation::LinearDerivation, tokens)
}

/// Rebuilds the derivation from its linearization with a pending-symbol stack.
///
/// Each popped symbol is expanded by the next token: a non-terminal starts a
/// body running through the first `</R>` token; a terminal starts a single
/// word, i.e. a run of marker-carrying pieces closed by an unmarked one.
pub fn linear_to_derivation(
    seq: &TokenSeq,
    root: &str,
    classes: &Classifier,
) -> Result<Derivation, TreeError> {
    let tokens = &seq.tokens;
    let mut pending: Vec<String> = vec![root.to_string()];
    let mut rules = Vec::new();
    let mut i = 0;
    while let Some(lhs) = pending.pop() {
        let first = tokens.get(i).ok_or(TreeError::TokenAt {
            index: i,
            reason: "sequence ended with pending non-terminals",
        })?;
        match classes.classify(first) {
            SymbolClass::NonTerminal | SymbolClass::RuleEnd => {
                let mut body = Vec::new();
                loop {
                    let tok = tokens.get(i).ok_or(TreeError::TokenAt {
                        index: i,
                        reason: "sequence ended inside a rule body",
                    })?;
                    match classes.classify(tok) {
                        SymbolClass::NonTerminal => body.push(tok.clone()),
                        SymbolClass::RuleEnd => {
                            body.push(tok[..tok.len() - RULE_END.len()].to_string());
                            i += 1;
                            break;
                        }
                        _ => {
                            return Err(TreeError::TokenAt {
                                index: i,
                                reason: "terminal inside a non-terminal rule body",
                            })
                        }
                    }
                    i += 1;
                }
                pending.extend(body.iter().rev().cloned());
                rules.push(Rule {
                    lhs,
                    rhs: Rhs::NonTerminals(body),
                });
            }
            SymbolClass::Terminal | SymbolClass::Piece => {
                let mut word = Vec::new();
                loop {
                    let tok = tokens.get(i).ok_or(TreeError::TokenAt {
                        index: i,
                        reason: "sequence ended inside a word",
                    })?;
                    let class = classes.classify(tok);
                    if !class.is_lexical() {
                        return Err(TreeError::TokenAt {
                            index: i,
                            reason: "non-terminal inside a word",
                        });
                    }
                    word.push(tok.clone());
                    i += 1;
                    if class == SymbolClass::Terminal {
                        break;
                    }
                }
                rules.push(Rule {
                    lhs,
                    rhs: Rhs::Terminals(word),
                });
            }
            _ => {
                return Err(TreeError::TokenAt {
                    index: i,
                    reason: "unexpected token in a linearized derivation",
                })
            }
        }
    }
    if i < tokens.len() {
        return Err(TreeError::TokenAt {
            index: i,
            reason: "tokens left over after the derivation is complete",
        });
    }
    Ok(Derivation { rules })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::treebank::parse_ptb;

    const T0: &str = "(ROOT (S (NP (DT No ) (NNS complications ) ) (VP (VBD occurred ) ) ) )";
    const ROW3: &str = "ROOT→S ; S→NP VP ; NP→DT NNS ; DT→No ; NNS→complications ; VP→VBD ; VBD→occurred";
    const ROW4: &str = "S</R> NP VP</R> DT NNS</R> No complications VBD</R> occurred";

    fn classes() -> Classifier {
        Classifier::new(["ROOT", "S", "NP", "VP", "DT", "NNS", "VBD", "NN"], "@@")
    }

    #[test]
    fn table_rows_three_and_four() {
        let t = parse_ptb(T0).unwrap();
        let d = tree_to_derivation(&t);
        assert_eq!(d.to_string(), ROW3);
        assert_eq!(Derivation::parse(ROW3).unwrap(), d);
        assert_eq!(derivation_to_linear(&d).to_string(), ROW4);
        let seq = TokenSeq::parse(Representation::LinearDerivation, ROW4);
        let back = linear_to_derivation(&seq, "ROOT", &classes()).unwrap();
        assert_eq!(back, d);
        assert_eq!(back.to_tree().unwrap(), t);
    }

    #[test]
    fn minimal_tree() {
        let t = parse_ptb("(ROOT (NN dog ) )").unwrap();
        let d = tree_to_derivation(&t);
        assert_eq!(d.to_string(), "ROOT→NN ; NN→dog");
        assert_eq!(derivation_to_linear(&d).to_string(), "NN</R> dog");
        let seq = TokenSeq::parse(Representation::LinearDerivation, "NN</R> dog");
        assert_eq!(linear_to_derivation(&seq, "ROOT", &classes()).unwrap(), d);
    }

    #[test]
    fn subword_runs_delimit_lexical_rules() {
        let t = parse_ptb("(ROOT (S (NN low@@ e@@ s@@ t ) (NN dog ) ) )").unwrap();
        let lin = derivation_to_linear(&tree_to_derivation(&t));
        assert_eq!(lin.to_string(), "S</R> NN NN</R> low@@ e@@ s@@ t dog");
        let d = linear_to_derivation(&lin, "ROOT", &classes()).unwrap();
        assert_eq!(d.to_tree().unwrap(), t);
    }

    #[test]
    fn reconstruction_errors() {
        let c = classes();
        let run = |s: &str| {
            linear_to_derivation(&TokenSeq::parse(Representation::LinearDerivation, s), "ROOT", &c)
        };
        assert!(matches!(run("S</R> NP VP</R>"), Err(TreeError::TokenAt { index: 3, .. })));
        assert!(matches!(run("NP VP"), Err(TreeError::TokenAt { index: 2, .. })));
        assert!(matches!(run("NP dog VP</R>"), Err(TreeError::TokenAt { index: 1, .. })));
        assert!(matches!(run("NN</R> dog cat"), Err(TreeError::TokenAt { index: 2, .. })));
        assert!(matches!(run("NN</R> do@@"), Err(TreeError::TokenAt { index: 2, .. })));
        assert!(matches!(run("NN</R> do@@ NP"), Err(TreeError::TokenAt { index: 2, .. })));
        assert!(matches!(run(""), Err(TreeError::TokenAt { index: 0, .. })));
    }

    #[test]
    fn derivation_to_tree_errors() {
        let d = Derivation::parse("ROOT→S ; NP→dog").unwrap();
        assert!(matches!(d.to_tree(), Err(TreeError::RuleAt { index: 1, .. })));
        let d = Derivation::parse("ROOT→S ; S→dog ; X→cat").unwrap();
        assert!(matches!(d.to_tree(), Err(TreeError::RuleAt { index: 2, .. })));
        let d = Derivation::parse("ROOT→S NP ; S→dog").unwrap_err();
        assert!(matches!(d, TreeError::RuleAt { index: 0, .. }));
        let d = Derivation::parse("ROOT→S NP ; S→dog ; NP→cat").unwrap();
        assert!(d.to_tree().is_ok());
        assert!(Derivation::parse("ROOT→S ; S→NP VP ; NP→a").is_err());
        let d = Derivation::parse("ROOT→S ; S→NP NP ; NP→a").unwrap();
        assert!(matches!(d.to_tree(), Err(TreeError::RuleAt { index: 3, .. })));
    }
}
