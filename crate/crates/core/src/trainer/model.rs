//! Single-layer tanh recurrent language model with hand-written BPTT.
//!
//! Parameters live in one flat vector so gradients, SGD steps and
//! checkpoint averaging are plain elementwise loops.

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::TrainError;
use crate::scorers::{log_softmax, ScorerState, SequenceScorer};
use crate::tokens::{TokenId, Vocab};

const HEADER: &str = "#toymodel v1";

/// One named parameter block.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Block {
    pub name: &'static str,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

impl Block {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Layout of the flat parameter vector for vocabulary size `v` and hidden size `d`.
pub fn layout(v: usize, d: usize) -> [Block; 6] {
    let shapes = [
        ("embedding", v, d),
        ("input_weights", d, d),
        ("hidden_weights", d, d),
        ("hidden_bias", 1, d),
        ("output_weights", d, v),
        ("output_bias", 1, v),
    ];
    let mut offset = 0;
    shapes.map(|(name, rows, cols)| {
        let b = Block {
            name,
            rows,
            cols,
            offset,
        };
        offset += rows * cols;
        b
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ToyModel {
    vocab_size: usize,
    hidden: usize,
    params: Vec<f64>,
}

/// Activations of one sequence, kept for the backward pass.
struct Trace {
    hidden: Vec<Vec<f64>>,
    probs: Vec<Vec<f64>>,
}

impl ToyModel {
    /// All-zero parameters.
    pub fn zeros(vocab_size: usize, hidden: usize) -> Self {
        let len = layout(vocab_size, hidden).iter().map(Block::len).sum();
        ToyModel {
            vocab_size,
            hidden,
            params: vec![0.0; len],
        }
    }

    /// Parameters drawn uniformly from `[-scale, scale]`.
    pub fn random(vocab_size: usize, hidden: usize, scale: f64, seed: u64) -> Self {
        let mut m = Self::zeros(vocab_size, hidden);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dist = Uniform::new_inclusive(-scale, scale);
        for p in &mut m.params {
            *p = dist.sample(&mut rng);
        }
        m
    }

    pub fn from_params(vocab_size: usize, hidden: usize, params: Vec<f64>) -> Result<Self, TrainError> {
        let m = Self::zeros(vocab_size, hidden);
        if params.len() != m.params.len() {
            return Err(TrainError::ShapeMismatch);
        }
        Ok(ToyModel { params, ..m })
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn blocks(&self) -> [Block; 6] {
        layout(self.vocab_size, self.hidden)
    }

    fn block(&self, i: usize) -> &[f64] {
        &self.params[self.blocks()[i].range()]
    }

    /// Hidden state after reading `input` from hidden state `prev`.
    pub fn step(&self, prev: &[f64], input: TokenId) -> Vec<f64> {
        let d = self.hidden;
        let x = &self.block(0)[input as usize * d..(input as usize + 1) * d];
        let (wx, wh, b) = (self.block(1), self.block(2), self.block(3));
        (0..d)
            .map(|i| {
                let mut a = b[i];
                for k in 0..d {
                    a += wx[i * d + k] * x[k] + wh[i * d + k] * prev[k];
                }
                a.tanh()
            })
            .collect()
    }

    /// Next-token log-probabilities from hidden state `h`.
    pub fn log_probs(&self, h: &[f64]) -> Vec<f64> {
        let v = self.vocab_size;
        let (wo, bo) = (self.block(4), self.block(5));
        let mut z = bo.to_vec();
        for (i, &hi) in h.iter().enumerate() {
            for (j, zj) in z.iter_mut().enumerate() {
                *zj += hi * wo[i * v + j];
            }
        }
        log_softmax(&mut z);
        z
    }

    fn check(&self, seq: &[TokenId]) -> Result<(), TrainError> {
        match seq
            .iter()
            .find(|&&t| t == Vocab::BOS_ID || t as usize >= self.vocab_size)
        {
            Some(&t) => Err(TrainError::IdOutOfRange(t)),
            None => Ok(()),
        }
    }

    fn run(&self, seq: &[TokenId]) -> (f64, Trace) {
        let mut h = vec![0.0; self.hidden];
        let mut trace = Trace {
            hidden: vec![h.clone()],
            probs: Vec::with_capacity(seq.len() + 1),
        };
        let mut loss = 0.0;
        let inputs = std::iter::once(Vocab::BOS_ID).chain(seq.iter().copied());
        let targets = seq.iter().copied().chain(std::iter::once(Vocab::EOS_ID));
        for (input, target) in inputs.zip(targets) {
            h = self.step(&h, input);
            let lp = self.log_probs(&h);
            loss -= lp[target as usize];
            trace.probs.push(lp.iter().map(|l| l.exp()).collect());
            trace.hidden.push(h.clone());
        }
        (loss, trace)
    }

    /// Summed negative log-likelihood of `batch` (each sequence followed by
    /// `</s>`) and the number of predicted tokens.
    pub fn forward_loss(&self, batch: &[Vec<TokenId>]) -> Result<(f64, usize), TrainError> {
        let mut loss = 0.0;
        let mut tokens = 0;
        for seq in batch {
            self.check(seq)?;
            loss += self.run(seq).0;
            tokens += seq.len() + 1;
        }
        Ok((loss, tokens))
    }

    /// Exact gradient of [`forward_loss`](Self::forward_loss), plus the loss
    /// and token count.
    pub fn backward(&self, batch: &[Vec<TokenId>]) -> Result<(Vec<f64>, f64, usize), TrainError> {
        let (v, d) = (self.vocab_size, self.hidden);
        let blocks = self.blocks();
        let [e_off, wx_off, wh_off, b_off, wo_off, bo_off] = blocks.map(|b| b.offset);
        let (wx, wh, wo) = (self.block(1), self.block(2), self.block(4));
        let mut grad = vec![0.0; self.params.len()];
        let mut loss = 0.0;
        let mut tokens = 0;
        for seq in batch {
            self.check(seq)?;
            let (l, trace) = self.run(seq);
            loss += l;
            tokens += seq.len() + 1;
            let inputs: Vec<TokenId> = std::iter::once(Vocab::BOS_ID).chain(seq.iter().copied()).collect();
            let targets: Vec<TokenId> = seq.iter().copied().chain(std::iter::once(Vocab::EOS_ID)).collect();
            let mut dh_next = vec![0.0; d];
            for t in (0..inputs.len()).rev() {
                let h = &trace.hidden[t + 1];
                let h_prev = &trace.hidden[t];
                let mut dz = trace.probs[t].clone();
                dz[targets[t] as usize] -= 1.0;
                let mut dh = dh_next.clone();
                for i in 0..d {
                    for j in 0..v {
                        grad[wo_off + i * v + j] += h[i] * dz[j];
                        dh[i] += wo[i * v + j] * dz[j];
                    }
                }
                for j in 0..v {
                    grad[bo_off + j] += dz[j];
                }
                let da: Vec<f64> = (0..d).map(|i| dh[i] * (1.0 - h[i] * h[i])).collect();
                let x_off = e_off + inputs[t] as usize * d;
                let x = &self.params[x_off..x_off + d];
                dh_next = vec![0.0; d];
                for i in 0..d {
                    grad[b_off + i] += da[i];
                    for k in 0..d {
                        grad[wx_off + i * d + k] += da[i] * x[k];
                        grad[wh_off + i * d + k] += da[i] * h_prev[k];
                        grad[x_off + k] += wx[i * d + k] * da[i];
                        dh_next[k] += wh[i * d + k] * da[i];
                    }
                }
            }
        }
        Ok((grad, loss, tokens))
    }

    /// Versioned text checkpoint: a shape header, then each block as a
    /// `name rows cols` line followed by `rows` lines of space-separated values.
    pub fn to_text(&self) -> String {
        let mut out = format!("{HEADER} vocab={} hidden={}\n", self.vocab_size, self.hidden);
        for b in self.blocks() {
            out.push_str(&format!("{} {} {}\n", b.name, b.rows, b.cols));
            for row in self.params[b.range()].chunks(b.cols) {
                let cells: Vec<String> = row.iter().map(|x| x.to_string()).collect();
                out.push_str(&cells.join(" "));
                out.push('\n');
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, TrainError> {
        let bad = |line: usize, reason: &str| TrainError::Checkpoint {
            line,
            reason: reason.to_string(),
        };
        let mut lines = text.lines().enumerate().map(|(n, l)| (n + 1, l));
        let (_, header) = lines.next().ok_or_else(|| bad(1, "empty checkpoint"))?;
        let mut dims = (None, None);
        for field in header
            .strip_prefix(HEADER)
            .ok_or_else(|| bad(1, "not a toy model checkpoint"))?
            .split_whitespace()
        {
            match field.split_once('=') {
                Some(("vocab", x)) => dims.0 = x.parse::<usize>().ok(),
                Some(("hidden", x)) => dims.1 = x.parse::<usize>().ok(),
                _ => return Err(bad(1, "unknown header field")),
            }
        }
        let (Some(v), Some(d)) = dims else {
            return Err(bad(1, "header needs vocab= and hidden="));
        };
        let mut m = Self::zeros(v, d);
        for b in m.blocks() {
            let (n, line) = lines.next().ok_or_else(|| bad(0, "truncated checkpoint"))?;
            if line != format!("{} {} {}", b.name, b.rows, b.cols) {
                return Err(bad(n, &format!("expected block `{} {} {}`", b.name, b.rows, b.cols)));
            }
            for r in 0..b.rows {
                let (n, line) = lines.next().ok_or_else(|| bad(0, "truncated checkpoint"))?;
                let row: Vec<f64> = line
                    .split(' ')
                    .map(|x| x.parse::<f64>().ok().filter(|x| x.is_finite()))
                    .collect::<Option<_>>()
                    .ok_or_else(|| bad(n, "bad parameter value"))?;
                if row.len() != b.cols {
                    return Err(bad(n, "wrong row width"));
                }
                let start = b.offset + r * b.cols;
                m.params[start..start + b.cols].copy_from_slice(&row);
            }
        }
        if let Some((n, _)) = lines.find(|(_, l)| !l.is_empty()) {
            return Err(bad(n, "trailing data"));
        }
        Ok(m)
    }
}

/// A trained [`ToyModel`] bound to its vocabulary.
#[derive(Clone, Debug)]
pub struct ToyScorer {
    model: ToyModel,
    vocab: Vocab,
}

impl ToyScorer {
    pub fn new(model: ToyModel, vocab: Vocab) -> Result<Self, TrainError> {
        if model.vocab_size() != vocab.len() {
            return Err(TrainError::ShapeMismatch);
        }
        Ok(ToyScorer { model, vocab })
    }

    pub fn model(&self) -> &ToyModel {
        &self.model
    }

    /// `#toyscorer v1`, then `\vocab` with the vocabulary file and `\model`
    /// with the checkpoint.
    pub fn to_text(&self) -> String {
        format!(
            "{SCORER_HEADER}\n\\vocab\n{}\\model\n{}",
            self.vocab.to_text(),
            self.model.to_text()
        )
    }

    pub fn from_text(text: &str) -> Result<Self, TrainError> {
        let bad = |line: usize, reason: &str| TrainError::Checkpoint {
            line,
            reason: reason.to_string(),
        };
        let rest = text
            .strip_prefix(SCORER_HEADER)
            .and_then(|r| r.strip_prefix("\n\\vocab\n"))
            .ok_or_else(|| bad(1, "not a toy scorer file"))?;
        let (vocab_text, model_text) = rest
            .split_once("\\model\n")
            .ok_or_else(|| bad(0, "missing \\model section"))?;
        let vocab = Vocab::from_text(vocab_text).map_err(|e| bad(2, &e.to_string()))?;
        ToyScorer::new(ToyModel::from_text(model_text)?, vocab)
    }
}

const SCORER_HEADER: &str = "#toyscorer v1";

impl SequenceScorer for ToyScorer {
    fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    /// Hidden state after reading `<s>`.
    fn initial_state(&self) -> ScorerState {
        ScorerState::Hidden(self.model.step(&vec![0.0; self.model.hidden()], Vocab::BOS_ID))
    }

    fn score_next(&self, state: &ScorerState) -> Vec<f64> {
        match state {
            ScorerState::Hidden(h) => self.model.log_probs(h),
            other => panic!("toy scorer expected a hidden state, got {other:?}"),
        }
    }

    fn advance(&self, state: &ScorerState, token: TokenId) -> ScorerState {
        match state {
            ScorerState::Hidden(h) => ScorerState::Hidden(self.model.step(h, token)),
            other => panic!("toy scorer expected a hidden state, got {other:?}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scorers::probability_mass;

    #[test]
    fn uniform_model_costs_log_v_per_token() {
        // zero weights: every non-<s> token gets the same logit
        let m = ToyModel::zeros(5, 3);
        let (loss, n) = m.forward_loss(&[vec![]]).unwrap();
        assert_eq!(n, 1);
        assert!((loss - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn hand_computed_two_step_loss() {
        // V=3 (<s>, </s>, a), d=2; only the embedding of <s>, the output
        // weights of unit 0 and the bias on `a` are non-zero
        let mut m = ToyModel::zeros(3, 2);
        let b = m.blocks();
        m.params[b[0].offset] = 1.0; // E[<s>][0]
        m.params[b[1].offset] = 1.0; // Wx[0][0]
        m.params[b[4].offset + 2] = 2.0; // Wo[0][a]
        m.params[b[5].offset + 1] = 0.5; // bo[</s>]
        // step 1: h = (tanh 1, 0); logits </s>=0.5, a=2 tanh 1; target a
        let h1 = 1f64.tanh();
        let lse = |x: f64, y: f64| (x.exp() + y.exp()).ln();
        let step1 = -(2.0 * h1 - lse(0.5, 2.0 * h1));
        // step 2: input a has zero embedding, Wh = 0, so h = 0; logits </s>=0.5, a=0
        let step2 = -(0.5 - lse(0.5, 0.0));
        let (loss, n) = m.forward_loss(&[vec![2]]).unwrap();
        assert_eq!(n, 2);
        assert!((loss - (step1 + step2)).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_ids() {
        let m = ToyModel::zeros(4, 2);
        assert_eq!(m.forward_loss(&[vec![2, 4]]), Err(TrainError::IdOutOfRange(4)));
        assert_eq!(m.forward_loss(&[vec![0]]), Err(TrainError::IdOutOfRange(0)));
    }

    #[test]
    fn scorer_matches_forward_pass() {
        let vocab = Vocab::from_tokens(["a", "b", "c"]);
        let m = ToyModel::random(vocab.len(), 4, 0.5, 7);
        let s = ToyScorer::new(m.clone(), vocab).unwrap();
        let seq = vec![2, 4, 3, 2];
        let (loss, _) = m.forward_loss(std::slice::from_ref(&seq)).unwrap();
        let scored = s.score_sequence(&[seq, vec![Vocab::EOS_ID]].concat());
        assert!((loss + scored).abs() < 1e-12);
        assert!((probability_mass(&s.score_next(&s.initial_state())) - 1.0).abs() < 1e-12);
        let back = ToyScorer::from_text(&s.to_text()).unwrap();
        assert_eq!(back.model(), s.model());
        assert_eq!(back.vocab(), s.vocab());
    }

    #[test]
    fn embedding_gradient_symmetry_on_zero_model() {
        // with all-zero weights nothing flows into the embeddings
        let m = ToyModel::zeros(4, 3);
        let (g, _, _) = m.backward(&[vec![2, 3], vec![3, 2]]).unwrap();
        assert!(g[m.blocks()[0].range()].iter().all(|&x| x == 0.0));
        // output bias gradient is the same for the two symmetric words
        let bo = m.blocks()[5].offset;
        assert_eq!(g[bo + 2], g[bo + 3]);
    }

    #[test]
    fn checkpoint_round_trip() {
        let m = ToyModel::random(5, 3, 0.3, 1);
        let back = ToyModel::from_text(&m.to_text()).unwrap();
        assert_eq!(back, m);
        let broken = m.to_text().replacen("hidden_bias 1 3", "hidden_bias 1 4", 1);
        assert!(matches!(ToyModel::from_text(&broken), Err(TrainError::Checkpoint { .. })));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut m = ToyModel::random(5, 3, 0.8, 11);
        let batch = vec![vec![2, 3, 4], vec![4], vec![3, 3, 2, 4]];
        let (g, _, _) = m.backward(&batch).unwrap();
        let eps = 1e-4;
        for b in m.blocks() {
            let mut worst: f64 = 0.0;
            let mut scale: f64 = 0.0;
            for i in b.range() {
                let orig = m.params[i];
                m.params[i] = orig + eps;
                let up = m.forward_loss(&batch).unwrap().0;
                m.params[i] = orig - eps;
                let down = m.forward_loss(&batch).unwrap().0;
                m.params[i] = orig;
                let fd = (up - down) / (2.0 * eps);
                worst = worst.max((fd - g[i]).abs());
                scale = scale.max(fd.abs());
            }
            assert!(worst / scale.max(1e-8) < 1e-4, "{}: {worst} vs {scale}", b.name);
        }
    }
}
