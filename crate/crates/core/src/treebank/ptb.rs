//! Bracketed (Penn-style) tree I/O and the linearized-tree representation.

use super::{Tree, TreeError};
use crate::tokens::{Representation, TokenSeq};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Lexeme<'a> {
    Open,
    Close,
    Atom(&'a str),
}

/// Splits on whitespace and parentheses, keeping byte offsets.
fn lex(text: &str) -> Vec<(usize, Lexeme<'_>)> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        if c == '(' || c == ')' || c.is_whitespace() {
            if let Some(s) = start.take() {
                out.push((s, Lexeme::Atom(&text[s..i])));
            }
            if c == '(' {
                out.push((i, Lexeme::Open));
            } else if c == ')' {
                out.push((i, Lexeme::Close));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((s, Lexeme::Atom(&text[s..])));
    }
    out
}

struct Parser<'a> {
    lexemes: Vec<(usize, Lexeme<'a>)>,
    pos: usize,
    end: usize,
}

impl<'a> Parser<'a> {
    fn offset(&self) -> usize {
        self.lexemes.get(self.pos).map_or(self.end, |l| l.0)
    }

    fn node(&mut self) -> Result<Tree, TreeError> {
        let open_at = self.offset();
        match self.lexemes.get(self.pos) {
            Some((_, Lexeme::Open)) => self.pos += 1,
            _ => return Err(TreeError::Expected { what: "`(`", offset: open_at }),
        }
        let label = match self.lexemes.get(self.pos) {
            Some((_, Lexeme::Atom(a))) => {
                self.pos += 1;
                *a
            }
            _ => {
                return Err(TreeError::Expected {
                    what: "node label",
                    offset: self.offset(),
                })
            }
        };
        super::tree::check_label(label).map_err(|_| TreeError::InvalidLabelAt {
            label: label.to_string(),
            offset: open_at,
        })?;
        let mut children = Vec::new();
        let mut leaves: Vec<String> = Vec::new();
        loop {
            match self.lexemes.get(self.pos) {
                None => return Err(TreeError::Unbalanced { offset: self.end }),
                Some((_, Lexeme::Close)) => {
                    self.pos += 1;
                    break;
                }
                Some((at, Lexeme::Atom(a))) => {
                    if !children.is_empty() {
                        return Err(TreeError::MixedRule {
                            label: label.to_string(),
                            offset: *at,
                        });
                    }
                    super::tree::check_terminal(a).map_err(|_| TreeError::InvalidLabelAt {
                        label: a.to_string(),
                        offset: *at,
                    })?;
                    leaves.push(a.to_string());
                    self.pos += 1;
                }
                Some((at, Lexeme::Open)) => {
                    if !leaves.is_empty() {
                        return Err(TreeError::MixedRule {
                            label: label.to_string(),
                            offset: *at,
                        });
                    }
                    children.push(self.node()?);
                }
            }
        }
        if !leaves.is_empty() {
            Ok(Tree::Preterminal {
                tag: label.to_string(),
                leaves,
            })
        } else if !children.is_empty() {
            Ok(Tree::Phrase {
                label: label.to_string(),
                children,
            })
        } else {
            Err(TreeError::EmptyNodeAt {
                label: label.to_string(),
                offset: open_at,
            })
        }
    }
}

/// Parses one bracketed tree. Tokens may be glued to brackets (`(NN dog)`).
pub fn parse_ptb(text: &str) -> Result<Tree, TreeError> {
    let mut parser = Parser {
        lexemes: lex(text),
        pos: 0,
        end: text.len(),
    };
    if parser.lexemes.is_empty() {
        return Err(TreeError::Expected {
            what: "`(`",
            offset: 0,
        });
    }
    let tree = parser.node()?;
    if let Some((at, lexeme)) = parser.lexemes.get(parser.pos) {
        return Err(match lexeme {
            Lexeme::Close => TreeError::Unbalanced { offset: *at },
            _ => TreeError::TrailingInput { offset: *at },
        });
    }
    Ok(tree)
}

/// Canonical bracketed form: tokens separated by single spaces, a space before every `)`.
pub fn render_ptb(tree: &Tree) -> String {
    linearize_tree(tree).to_string()
}

/// Depth-first `(LABEL`, leaf, `)` token stream.
pub fn linearize_tree(tree: &Tree) -> TokenSeq {
    fn emit(tree: &Tree, out: &mut Vec<String>) {
        out.push(format!("({}", tree.label()));
        match tree {
            Tree::Phrase { children, .. } => {
                for c in children {
                    emit(c, out);
                }
            }
            Tree::Preterminal { leaves, .. } => out.extend(leaves.iter().cloned()),
        }
        out.push(")".to_string());
    }
    let mut tokens = Vec::with_capacity(2 * tree.internal_count() + tree.leaf_count());
    emit(tree, &mut tokens);
    TokenSeq::new(Representation::LinearTree, tokens)
}

/// Inverse of [`linearize_tree`]. Errors carry the offending token index.
pub fn delinearize_tree(seq: &TokenSeq) -> Result<Tree, TreeError> {
    delinearize_tokens(&seq.tokens)
}

pub fn delinearize_tokens<S: AsRef<str>>(tokens: &[S]) -> Result<Tree, TreeError> {
    enum Frame {
        Open { label: String },
        Phrase { label: String, children: Vec<Tree> },
        Pre { tag: String, leaves: Vec<String> },
    }
    let mut stack: Vec<Frame> = Vec::new();
    let mut opened: Vec<usize> = Vec::new();
    let mut done: Option<Tree> = None;
    for (i, tok) in tokens.iter().enumerate() {
        let tok = tok.as_ref();
        if done.is_some() {
            return Err(TreeError::TokenAt {
                index: i,
                reason: "tokens after the root was closed",
            });
        }
        if tok == ")" {
            opened.pop();
            let tree = match stack.pop() {
                None => {
                    return Err(TreeError::TokenAt {
                        index: i,
                        reason: "unbalanced `)`",
                    })
                }
                Some(Frame::Open { .. }) => {
                    return Err(TreeError::TokenAt {
                        index: i,
                        reason: "empty node",
                    })
                }
                Some(Frame::Phrase { label, children }) => Tree::Phrase { label, children },
                Some(Frame::Pre { tag, leaves }) => Tree::Preterminal { tag, leaves },
            };
            match stack.last_mut() {
                None => done = Some(tree),
                Some(parent) => attach(parent, tree, i)?,
            }
        } else if let Some(label) = tok.strip_prefix('(') {
            super::tree::check_label(label).map_err(|_| TreeError::TokenAt {
                index: i,
                reason: "invalid node label",
            })?;
            stack.push(Frame::Open {
                label: label.to_string(),
            });
            opened.push(i);
        } else {
            super::tree::check_terminal(tok).map_err(|_| TreeError::TokenAt {
                index: i,
                reason: "invalid terminal",
            })?;
            match stack.last_mut() {
                None => {
                    return Err(TreeError::TokenAt {
                        index: i,
                        reason: "terminal outside any node",
                    })
                }
                Some(frame) => match frame {
                    Frame::Open { label, .. } => {
                        *frame = Frame::Pre {
                            tag: std::mem::take(label),
                            leaves: vec![tok.to_string()],
                        }
                    }
                    Frame::Pre { leaves, .. } => leaves.push(tok.to_string()),
                    Frame::Phrase { .. } => {
                        return Err(TreeError::TokenAt {
                            index: i,
                            reason: "terminal mixed with non-terminal children",
                        })
                    }
                },
            }
        }
    }

    fn attach(parent: &mut Frame, tree: Tree, index: usize) -> Result<(), TreeError> {
        match parent {
            Frame::Open { label, .. } => {
                *parent = Frame::Phrase {
                    label: std::mem::take(label),
                    children: vec![tree],
                };
                Ok(())
            }
            Frame::Phrase { children, .. } => {
                children.push(tree);
                Ok(())
            }
            Frame::Pre { .. } => Err(TreeError::TokenAt {
                index,
                reason: "non-terminal child mixed with terminals",
            }),
        }
    }

    match (done, opened.first()) {
        (Some(t), _) => Ok(t),
        (None, Some(&at)) => Err(TreeError::TokenAt {
            index: at,
            reason: "unclosed node",
        }),
        (None, None) => Err(TreeError::TokenAt {
            index: 0,
            reason: "empty sequence",
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const T0: &str = "(ROOT (S (NP (DT No ) (NNS complications ) ) (VP (VBD occurred ) ) ) )";

    #[test]
    fn table_example_parses_and_renders() {
        let t = parse_ptb(T0).unwrap();
        assert_eq!(t.label(), "ROOT");
        assert_eq!(t.leaves(), vec!["No", "complications", "occurred"]);
        assert_eq!(render_ptb(&t), T0);
    }

    #[test]
    fn glued_brackets_normalize() {
        let t = parse_ptb("(ROOT(NN dog))").unwrap();
        assert_eq!(render_ptb(&t), "(ROOT (NN dog ) )");
        let t = parse_ptb("  (ROOT (NN dog ) )\n").unwrap();
        assert_eq!(render_ptb(&t), "(ROOT (NN dog ) )");
    }

    #[test]
    fn linearized_tokens() {
        let t = parse_ptb(T0).unwrap();
        let seq = linearize_tree(&t);
        let expected = [
            "(ROOT", "(S", "(NP", "(DT", "No", ")", "(NNS", "complications", ")", ")", "(VP",
            "(VBD", "occurred", ")", ")", ")", ")",
        ];
        assert_eq!(seq.tokens, expected);
        assert_eq!(delinearize_tree(&seq).unwrap(), t);

        let min = linearize_tree(&parse_ptb("(ROOT (NN dog ) )").unwrap());
        assert_eq!(min.tokens, ["(ROOT", "(NN", "dog", ")", ")"]);
    }

    #[test]
    fn parse_errors_carry_offsets() {
        assert_eq!(
            parse_ptb("(ROOT (NN dog )"),
            Err(TreeError::Unbalanced { offset: 15 })
        );
        assert_eq!(
            parse_ptb("(ROOT (NN dog ) ) )"),
            Err(TreeError::Unbalanced { offset: 18 })
        );
        assert!(matches!(
            parse_ptb("(ROOT (NN dog ) cat )"),
            Err(TreeError::MixedRule { offset: 16, .. })
        ));
        assert!(matches!(
            parse_ptb("(ROOT cat (NN dog ) )"),
            Err(TreeError::MixedRule { offset: 10, .. })
        ));
        assert!(matches!(
            parse_ptb("(ROOT (NN ) )"),
            Err(TreeError::EmptyNodeAt { offset: 6, .. })
        ));
        assert!(matches!(
            parse_ptb("( (NN dog ) )"),
            Err(TreeError::Expected { offset: 2, .. })
        ));
        assert!(matches!(
            parse_ptb("(NN a</R> )"),
            Err(TreeError::InvalidLabelAt { .. })
        ));
        assert!(matches!(
            parse_ptb("(NN a) (NN b)"),
            Err(TreeError::TrailingInput { offset: 7 })
        ));
        assert!(parse_ptb("").is_err());
    }

    #[test]
    fn delinearize_errors_carry_index() {
        let bad = |toks: &[&str]| delinearize_tokens(toks).unwrap_err();
        assert!(matches!(bad(&["(ROOT", "(NN", "dog", ")"]), TreeError::TokenAt { index: 0, .. }));
        assert!(matches!(bad(&["(ROOT", ")"]), TreeError::TokenAt { index: 1, .. }));
        assert!(matches!(
            bad(&["(ROOT", "(NN", "dog", ")", ")", ")"]),
            TreeError::TokenAt { index: 5, .. }
        ));
        assert!(matches!(
            bad(&["(ROOT", "(NN", "dog", ")", "cat", ")"]),
            TreeError::TokenAt { index: 4, .. }
        ));
        assert!(matches!(bad(&["dog"]), TreeError::TokenAt { index: 0, .. }));
        assert!(matches!(bad(&[] as &[&str]), TreeError::TokenAt { index: 0, .. }));
    }
}
