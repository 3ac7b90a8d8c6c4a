use super::TrainError;
use crate::tokens::TokenId;

pub type Batch = Vec<Vec<TokenId>>;

/// Tokens in `batch` once every sequence is padded to the longest one.
/// An empty sequence still occupies one slot.
pub fn padded_tokens(batch: &[Vec<TokenId>]) -> usize {
    batch.len() * batch.iter().map(|s| s.len().max(1)).max().unwrap_or(0)
}

/// Greedy length-sorted batching under a padded-token budget: sequences are
/// sorted by length (stable) and appended to the current batch until the
/// next one would push the padded size over `budget`.
pub fn batch_corpus(corpus: &[Vec<TokenId>], budget: usize) -> Result<Vec<Batch>, TrainError> {
    if let Some(s) = corpus.iter().find(|s| s.len().max(1) > budget) {
        return Err(TrainError::SequenceTooLong {
            len: s.len(),
            budget,
        });
    }
    let mut order: Vec<&Vec<TokenId>> = corpus.iter().collect();
    order.sort_by_key(|s| s.len());
    let mut batches = Vec::new();
    let mut current: Batch = Vec::new();
    for seq in order {
        // sorted ascending, so the newcomer is the longest
        if (current.len() + 1) * seq.len().max(1) > budget {
            batches.push(std::mem::take(&mut current));
        }
        current.push(seq.clone());
    }
    if !current.is_empty() {
        batches.push(current);
    }
    Ok(batches)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_length_examples() {
        let short = vec![vec![2; 10]; 10];
        let b = batch_corpus(&short, 100).unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!(b[0].len(), 10);

        let long = vec![vec![2; 50]; 10];
        let b = batch_corpus(&long, 100).unwrap();
        assert_eq!(b.len(), 5);
        assert!(b.iter().all(|x| x.len() == 2));
    }

    #[test]
    fn too_long_is_an_error() {
        assert_eq!(
            batch_corpus(&[vec![2; 11]], 10),
            Err(TrainError::SequenceTooLong { len: 11, budget: 10 })
        );
    }

    #[test]
    fn keeps_every_sequence() {
        let corpus: Vec<Vec<TokenId>> = (0..30).map(|i| vec![2; i % 7]).collect();
        let b = batch_corpus(&corpus, 12).unwrap();
        assert_eq!(b.iter().map(Vec::len).sum::<usize>(), 30);
        assert!(b.iter().all(|x| padded_tokens(x) <= 12));
    }
}
