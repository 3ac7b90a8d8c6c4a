use std::fmt;

use super::TreeError;
use crate::tokens::RULE_END;

/// A constituency tree.
///
/// Phrase nodes dominate only other nodes; preterminals dominate only
/// terminal tokens (words or subword pieces). Mixed rules are not
/// representable.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Tree {
    Phrase { label: String, children: Vec<Tree> },
    Preterminal { tag: String, leaves: Vec<String> },
}

pub(crate) fn check_label(label: &str) -> Result<(), TreeError> {
    if label.is_empty()
        || label.contains(RULE_END)
        || label.chars().any(|c| c.is_whitespace() || c == '(' || c == ')')
    {
        return Err(TreeError::InvalidSymbol {
            symbol: label.to_string(),
        });
    }
    Ok(())
}

pub(crate) fn check_terminal(word: &str) -> Result<(), TreeError> {
    // same alphabet restrictions as labels
    check_label(word)
}

impl Tree {
    pub fn phrase(label: impl Into<String>, children: Vec<Tree>) -> Result<Tree, TreeError> {
        let label = label.into();
        check_label(&label)?;
        if children.is_empty() {
            return Err(TreeError::EmptyNode { label });
        }
        Ok(Tree::Phrase { label, children })
    }

    pub fn preterminal<S: Into<String>>(
        tag: impl Into<String>,
        leaves: Vec<S>,
    ) -> Result<Tree, TreeError> {
        let tag = tag.into();
        check_label(&tag)?;
        let leaves: Vec<String> = leaves.into_iter().map(Into::into).collect();
        if leaves.is_empty() {
            return Err(TreeError::EmptyNode { label: tag });
        }
        for w in &leaves {
            check_terminal(w)?;
        }
        Ok(Tree::Preterminal { tag, leaves })
    }

    pub fn label(&self) -> &str {
        match self {
            Tree::Phrase { label, .. } => label,
            Tree::Preterminal { tag, .. } => tag,
        }
    }

    /// Number of labelled (non-leaf) nodes.
    pub fn internal_count(&self) -> usize {
        match self {
            Tree::Phrase { children, .. } => {
                1 + children.iter().map(Tree::internal_count).sum::<usize>()
            }
            Tree::Preterminal { .. } => 1,
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            Tree::Phrase { children, .. } => children.iter().map(Tree::leaf_count).sum(),
            Tree::Preterminal { leaves, .. } => leaves.len(),
        }
    }

    pub fn preterminal_count(&self) -> usize {
        match self {
            Tree::Phrase { children, .. } => children.iter().map(Tree::preterminal_count).sum(),
            Tree::Preterminal { .. } => 1,
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Tree::Phrase { children, .. } => {
                1 + children.iter().map(Tree::depth).max().unwrap_or(0)
            }
            Tree::Preterminal { .. } => 2,
        }
    }

    /// Terminal tokens, left to right.
    pub fn leaves(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.visit_preterminals(&mut |_, leaves| out.extend(leaves.iter().map(String::as_str)));
        out
    }

    /// Calls `f(tag, leaves)` for every preterminal, left to right.
    pub fn visit_preterminals<'a, F: FnMut(&'a str, &'a [String])>(&'a self, f: &mut F) {
        match self {
            Tree::Phrase { children, .. } => {
                for c in children {
                    c.visit_preterminals(f);
                }
            }
            Tree::Preterminal { tag, leaves } => f(tag, leaves),
        }
    }

    /// Every node label, pre-order.
    pub fn labels(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_labels(&mut out);
        out
    }

    fn collect_labels<'a>(&'a self, out: &mut Vec<&'a str>) {
        out.push(self.label());
        if let Tree::Phrase { children, .. } = self {
            for c in children {
                c.collect_labels(out);
            }
        }
    }

    /// Replaces every preterminal's leaves.
    pub fn map_leaves<F: FnMut(&[String]) -> Vec<String>>(&self, f: &mut F) -> Tree {
        match self {
            Tree::Phrase { label, children } => Tree::Phrase {
                label: label.clone(),
                children: children.iter().map(|c| c.map_leaves(f)).collect(),
            },
            Tree::Preterminal { tag, leaves } => Tree::Preterminal {
                tag: tag.clone(),
                leaves: f(leaves),
            },
        }
    }
}

impl fmt::Display for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&super::render_ptb(self))
    }
}
