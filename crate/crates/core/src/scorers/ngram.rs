use std::collections::{BTreeMap, HashMap};

use super::{ScorerError, ScorerState, SequenceScorer};
use crate::tokens::{TokenId, Vocab};

pub const DEFAULT_SMOOTHING: f64 = 0.1;

const HEADER: &str = "#ngram v1";

/// Add-k smoothed n-gram model.
///
/// Conditionals are stored for every context seen in training (all lengths
/// up to `order - 1`, histories padded with `<s>`). An unseen context backs
/// off to its longest seen suffix; the empty context always exists.
#[derive(Clone, Debug, PartialEq)]
pub struct NgramModel {
    vocab: Vocab,
    order: usize,
    k: f64,
    tables: HashMap<Vec<TokenId>, Vec<f64>>,
}

/// Trains on token lines. `vocab` defaults to the corpus tokens; pass a
/// shared one to put several models on the same vocabulary.
pub fn train_ngram<L: AsRef<[String]>>(
    corpus: &[L],
    order: usize,
    k: f64,
    vocab: Option<Vocab>,
) -> Result<NgramModel, ScorerError> {
    if order == 0 {
        return Err(ScorerError::InvalidOrder);
    }
    if !(k > 0.0 && k.is_finite()) {
        return Err(ScorerError::InvalidSmoothing(k));
    }
    if corpus.is_empty() {
        return Err(ScorerError::EmptyCorpus);
    }
    let vocab = vocab.unwrap_or_else(|| Vocab::from_corpus(corpus));
    let v = vocab.len();
    let mut counts: BTreeMap<Vec<TokenId>, Vec<u64>> = BTreeMap::new();
    for line in corpus {
        let ids = vocab
            .encode(line.as_ref())
            .map_err(ScorerError::UnknownToken)?;
        let mut padded = vec![Vocab::BOS_ID; order - 1];
        padded.extend(ids);
        padded.push(Vocab::EOS_ID);
        for t in order - 1..padded.len() {
            for j in 0..order {
                let ctx = padded[t - j..t].to_vec();
                counts.entry(ctx).or_insert_with(|| vec![0; v])[padded[t] as usize] += 1;
            }
        }
    }
    let predictable = (v - 1) as f64;
    let tables = counts
        .into_iter()
        .map(|(ctx, c)| {
            let total: u64 = c.iter().sum();
            let denom = total as f64 + k * predictable;
            let mut lp: Vec<f64> = c.iter().map(|&n| ((n as f64 + k) / denom).ln()).collect();
            lp[Vocab::BOS_ID as usize] = f64::NEG_INFINITY;
            (ctx, lp)
        })
        .collect();
    Ok(NgramModel {
        vocab,
        order,
        k,
        tables,
    })
}

impl NgramModel {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn smoothing(&self) -> f64 {
        self.k
    }

    /// Conditional distribution for an explicit context (most recent last).
    pub fn conditional(&self, context: &[TokenId]) -> &[f64] {
        let n = context.len().min(self.order - 1);
        let ctx = &context[context.len() - n..];
        for j in (0..=n).rev() {
            if let Some(lp) = self.tables.get(&ctx[n - j..]) {
                return lp;
            }
        }
        unreachable!("the empty context is always present")
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{HEADER} order={} k={}\n\\vocab\n", self.order, self.k);
        out.push_str(&self.vocab.to_text());
        out.push_str("\\table\n");
        let mut contexts: Vec<&Vec<TokenId>> = self.tables.keys().collect();
        contexts.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        for ctx in contexts {
            let ctx_text = self.vocab.decode(ctx).join(" ");
            for (id, lp) in self.tables[ctx].iter().enumerate().skip(1) {
                out.push_str(&format!("{ctx_text}\t{}\t{lp}\n", self.vocab.token(id as TokenId)));
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, ScorerError> {
        let bad = |line: usize, reason: &str| ScorerError::Malformed {
            line,
            reason: reason.to_string(),
        };
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| bad(1, "missing header"))?;
        let mut order = None;
        let mut k = None;
        for field in header
            .strip_prefix(HEADER)
            .ok_or_else(|| bad(1, "not an n-gram model file"))?
            .split_whitespace()
        {
            match field.split_once('=') {
                Some(("order", v)) => order = v.parse::<usize>().ok(),
                Some(("k", v)) => k = v.parse::<f64>().ok(),
                _ => return Err(bad(1, "unknown header field")),
            }
        }
        let (order, k) = match (order, k) {
            (Some(o), Some(k)) if o >= 1 => (o, k),
            _ => return Err(bad(1, "header needs order= and k=")),
        };
        match lines.next() {
            Some((_, "\\vocab")) => {}
            _ => return Err(bad(2, "expected \\vocab")),
        }
        let mut vocab_text = String::new();
        let mut table_start = None;
        for (n, line) in lines.by_ref() {
            if line == "\\table" {
                table_start = Some(n);
                break;
            }
            vocab_text.push_str(line);
            vocab_text.push('\n');
        }
        let table_start = table_start.ok_or_else(|| bad(0, "missing \\table section"))?;
        let vocab = Vocab::from_text(&vocab_text).map_err(|e| bad(table_start, &e.to_string()))?;
        let mut tables: HashMap<Vec<TokenId>, Vec<f64>> = HashMap::new();
        for (n, line) in lines {
            let mut parts = line.split('\t');
            let (ctx, tok, lp) = match (parts.next(), parts.next(), parts.next(), parts.next()) {
                (Some(c), Some(t), Some(l), None) => (c, t, l),
                _ => return Err(bad(n + 1, "expected `context<TAB>token<TAB>logprob`")),
            };
            let ctx: Vec<&str> = ctx.split_whitespace().collect();
            let ctx = vocab
                .encode(&ctx)
                .map_err(|t| bad(n + 1, &format!("unknown context token `{t}`")))?;
            if ctx.len() >= order {
                return Err(bad(n + 1, "context longer than order - 1"));
            }
            let id = vocab
                .id(tok)
                .filter(|&id| id != Vocab::BOS_ID)
                .ok_or_else(|| bad(n + 1, "unknown or reserved token"))?;
            let lp: f64 = lp.parse().map_err(|_| bad(n + 1, "bad log-probability"))?;
            let row = tables.entry(ctx).or_insert_with(|| {
                let mut row = vec![f64::NAN; vocab.len()];
                row[0] = f64::NEG_INFINITY;
                row
            });
            row[id as usize] = lp;
        }
        if !tables.contains_key(&Vec::new()) {
            return Err(bad(0, "missing the empty-context distribution"));
        }
        if tables.values().any(|row| row.iter().any(|x| x.is_nan())) {
            return Err(bad(0, "incomplete distribution for some context"));
        }
        Ok(NgramModel {
            vocab,
            order,
            k,
            tables,
        })
    }
}

impl SequenceScorer for NgramModel {
    fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    fn initial_state(&self) -> ScorerState {
        ScorerState::Tokens(vec![Vocab::BOS_ID; self.order - 1])
    }

    fn score_next(&self, state: &ScorerState) -> Vec<f64> {
        self.conditional(state.tokens()).to_vec()
    }

    fn advance(&self, state: &ScorerState, token: TokenId) -> ScorerState {
        let mut ctx = state.tokens().to_vec();
        if self.order > 1 {
            ctx.remove(0);
            ctx.push(token);
        }
        ScorerState::Tokens(ctx)
    }
}
