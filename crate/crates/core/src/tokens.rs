//! Token-level vocabulary shared by every representation.
//!
//! Tokens are plain strings. Their role inside a representation (non-terminal,
//! rule-final non-terminal, bracket, subword piece, ...) is decided purely by
//! shape plus a label inventory, see [`Classifier`].

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Sentence-start token. Never predicted by a scorer.
pub const BOS: &str = "<s>";
/// Sentence-end token.
pub const EOS: &str = "</s>";
/// End-of-rule marker fused onto the last non-terminal of a rule body.
pub const RULE_END: &str = "</R>";
/// Default subword continuation marker.
pub const DEFAULT_MARKER: &str = "@@";

pub type TokenId = u32;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum VocabError {
    #[error("line {line}: expected `token<TAB>id`")]
    Malformed { line: usize },
    #[error("line {line}: id {id} is not the next consecutive id")]
    NonConsecutive { line: usize, id: u64 },
    #[error("line {line}: duplicate token `{token}`")]
    Duplicate { line: usize, token: String },
    #[error("vocabulary must start with `{BOS}` and `{EOS}` as ids 0 and 1")]
    MissingSpecials,
}

/// Bidirectional token/id map. Ids 0 and 1 are always [`BOS`] and [`EOS`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    ids: HashMap<String, TokenId>,
}

impl Vocab {
    pub const BOS_ID: TokenId = 0;
    pub const EOS_ID: TokenId = 1;

    /// Builds a vocabulary from the given tokens, sorted, after the two specials.
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let set: BTreeSet<String> = tokens
            .into_iter()
            .map(|t| t.as_ref().to_string())
            .filter(|t| t != BOS && t != EOS)
            .collect();
        let mut vocab = Vocab {
            tokens: Vec::with_capacity(set.len() + 2),
            ids: HashMap::with_capacity(set.len() + 2),
        };
        vocab.push(BOS.to_string());
        vocab.push(EOS.to_string());
        for t in set {
            vocab.push(t);
        }
        vocab
    }

    /// Collects every token of every line.
    pub fn from_corpus<L: AsRef<[String]>>(lines: &[L]) -> Self {
        Vocab::from_tokens(lines.iter().flat_map(|l| l.as_ref().iter()))
    }

    fn push(&mut self, token: String) {
        let id = self.tokens.len() as TokenId;
        self.ids.insert(token.clone(), id);
        self.tokens.push(token);
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> &str {
        &self.tokens[id as usize]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Maps tokens to ids; returns the first unknown token on failure.
    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Vec<TokenId>, String> {
        tokens
            .iter()
            .map(|t| self.id(t.as_ref()).ok_or_else(|| t.as_ref().to_string()))
            .collect()
    }

    pub fn decode(&self, ids: &[TokenId]) -> Vec<String> {
        ids.iter().map(|&i| self.token(i).to_string()).collect()
    }

    /// `token<TAB>id` per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, t) in self.tokens.iter().enumerate() {
            out.push_str(t);
            out.push('\t');
            out.push_str(&i.to_string());
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, VocabError> {
        let mut vocab = Vocab {
            tokens: Vec::new(),
            ids: HashMap::new(),
        };
        for (n, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let (tok, id) = line
                .split_once('\t')
                .ok_or(VocabError::Malformed { line: n + 1 })?;
            let id: u64 = id.parse().map_err(|_| VocabError::Malformed { line: n + 1 })?;
            if id != vocab.tokens.len() as u64 {
                return Err(VocabError::NonConsecutive { line: n + 1, id });
            }
            if vocab.ids.contains_key(tok) {
                return Err(VocabError::Duplicate {
                    line: n + 1,
                    token: tok.to_string(),
                });
            }
            vocab.push(tok.to_string());
        }
        if vocab.tokens.len() < 2 || vocab.tokens[0] != BOS || vocab.tokens[1] != EOS {
            return Err(VocabError::MissingSpecials);
        }
        Ok(vocab)
    }
}

/// Role of a token inside a sequence, decided by its shape.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SymbolClass {
    /// A bare non-terminal or POS tag from the label inventory.
    NonTerminal,
    /// A non-terminal carrying the fused `</R>` marker.
    RuleEnd,
    /// `(LABEL` in a linearized tree.
    Open,
    /// `)` in a linearized tree.
    Close,
    /// Non-final subword piece (carries the continuation marker).
    Piece,
    /// Word-final terminal.
    Terminal,
    Eos,
    Bos,
}

impl SymbolClass {
    pub const ALL: [SymbolClass; 8] = [
        SymbolClass::NonTerminal,
        SymbolClass::RuleEnd,
        SymbolClass::Open,
        SymbolClass::Close,
        SymbolClass::Piece,
        SymbolClass::Terminal,
        SymbolClass::Eos,
        SymbolClass::Bos,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SymbolClass::NonTerminal => "NONTERMINAL",
            SymbolClass::RuleEnd => "RULE_END_NONTERMINAL",
            SymbolClass::Open => "OPEN",
            SymbolClass::Close => "CLOSE",
            SymbolClass::Piece => "PIECE",
            SymbolClass::Terminal => "TERMINAL",
            SymbolClass::Eos => "EOS",
            SymbolClass::Bos => "BOS",
        }
    }

    /// Non-terminal-bearing classes.
    pub fn is_syntactic(self) -> bool {
        matches!(
            self,
            SymbolClass::NonTerminal | SymbolClass::RuleEnd | SymbolClass::Open
        )
    }

    /// Word material: pieces and word-final terminals.
    pub fn is_lexical(self) -> bool {
        matches!(self, SymbolClass::Piece | SymbolClass::Terminal)
    }
}

impl fmt::Display for SymbolClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SymbolClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SymbolClass::ALL
            .iter()
            .copied()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown symbol class `{s}`"))
    }
}

/// Decides [`SymbolClass`] membership from token shape.
///
/// Words and labels must be disjoint: a terminal spelled like a label is
/// classified as a non-terminal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Classifier {
    labels: BTreeSet<String>,
    marker: String,
}

impl Classifier {
    pub fn new<I, S>(labels: I, marker: &str) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Classifier {
            labels: labels.into_iter().map(Into::into).collect(),
            marker: marker.to_string(),
        }
    }

    /// Classifier with no label inventory: only bracket, `</R>` and marker shapes.
    pub fn lexical(marker: &str) -> Self {
        Classifier::new(Vec::<String>::new(), marker)
    }

    pub fn labels(&self) -> &BTreeSet<String> {
        &self.labels
    }

    pub fn marker(&self) -> &str {
        &self.marker
    }

    pub fn is_label(&self, token: &str) -> bool {
        self.labels.contains(token)
    }

    pub fn classify(&self, token: &str) -> SymbolClass {
        if token == EOS {
            SymbolClass::Eos
        } else if token == BOS {
            SymbolClass::Bos
        } else if token == ")" {
            SymbolClass::Close
        } else if token.len() > 1 && token.starts_with('(') {
            SymbolClass::Open
        } else if token.len() > RULE_END.len() && token.ends_with(RULE_END) {
            SymbolClass::RuleEnd
        } else if self.labels.contains(token) {
            SymbolClass::NonTerminal
        } else if !self.marker.is_empty()
            && token.len() > self.marker.len()
            && token.ends_with(&self.marker)
        {
            SymbolClass::Piece
        } else {
            SymbolClass::Terminal
        }
    }

    /// One label per line.
    pub fn labels_to_text(&self) -> String {
        self.labels.iter().map(|l| format!("{l}\n")).collect()
    }

    pub fn labels_from_text(text: &str) -> BTreeSet<String> {
        text.lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(str::to_string)
            .collect()
    }
}

/// The five target-side representations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Representation {
    PlainText,
    LinearTree,
    LinearDerivation,
    PosText,
}

impl Representation {
    pub fn is_syntax(self) -> bool {
        matches!(
            self,
            Representation::LinearTree | Representation::LinearDerivation
        )
    }
}

/// A flat token sequence tagged with its representation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenSeq {
    pub kind: Representation,
    pub tokens: Vec<String>,
}

impl TokenSeq {
    pub fn new(kind: Representation, tokens: Vec<String>) -> Self {
        TokenSeq { kind, tokens }
    }

    /// Splits on ASCII whitespace.
    pub fn parse(kind: Representation, line: &str) -> Self {
        TokenSeq {
            kind,
            tokens: line.split_whitespace().map(str::to_string).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

impl fmt::Display for TokenSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tokens.join(" "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classify_shapes() {
        let c = Classifier::new(["NP", "VP", "DT"], "@@");
        assert_eq!(c.classify("NP"), SymbolClass::NonTerminal);
        assert_eq!(c.classify("VP</R>"), SymbolClass::RuleEnd);
        assert_eq!(c.classify("(S"), SymbolClass::Open);
        assert_eq!(c.classify(")"), SymbolClass::Close);
        assert_eq!(c.classify("low@@"), SymbolClass::Piece);
        assert_eq!(c.classify("low"), SymbolClass::Terminal);
        assert_eq!(c.classify("("), SymbolClass::Terminal);
        assert_eq!(c.classify("@@"), SymbolClass::Terminal);
        assert_eq!(c.classify(EOS), SymbolClass::Eos);
    }

    #[test]
    fn vocab_text_round_trip() {
        let v = Vocab::from_tokens(["b", "a", "a"]);
        assert_eq!(v.tokens(), &[BOS, EOS, "a", "b"]);
        assert_eq!(Vocab::from_text(&v.to_text()).unwrap(), v);
        assert_eq!(
            Vocab::from_text("a\t0\n"),
            Err(VocabError::MissingSpecials)
        );
        assert!(matches!(
            Vocab::from_text("<s>\t0\n</s>\t2\n"),
            Err(VocabError::NonConsecutive { line: 2, id: 2 })
        ));
    }

    #[test]
    fn class_names_parse_back() {
        for c in SymbolClass::ALL {
            assert_eq!(c.name().parse::<SymbolClass>().unwrap(), c);
        }
    }
}
