use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use synens::scorers::{probability_mass, SequenceScorer};
use synens::tokens::{TokenId, Vocab};
use synens::trainer::{
    accumulate_and_update, average_checkpoints, batch_corpus, padded_tokens, train, Batch,
    ToyModel, TrainConfig,
};

fn random_batches(rng: &mut ChaCha8Rng, v: usize, count: usize) -> Vec<Batch> {
    (0..count)
        .map(|_| {
            (0..rng.gen_range(1..4))
                .map(|_| (0..rng.gen_range(0..7)).map(|_| rng.gen_range(1..v) as TokenId).collect())
                .collect()
        })
        .collect()
}

fn relative_difference(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let scale = b.iter().map(|x| x.abs()).fold(0.0, f64::max);
    diff / scale
}

#[test]
fn accumulated_update_equals_concatenated_batch() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for instance in 0..50u64 {
        for k in [2, 4, 8] {
            let v = rng.gen_range(3..9);
            let d = rng.gen_range(1..6);
            let model = ToyModel::random(v, d, 0.5, instance * 10 + k as u64);
            let batches = random_batches(&mut rng, v, k);
            let cfg = TrainConfig {
                batches_per_update: k,
                learning_rate: rng.gen_range(0.01..1.0),
                ..TrainConfig::default()
            };
            let mut delayed = model.clone();
            assert_eq!(accumulate_and_update(&mut delayed, &batches, &cfg).unwrap().len(), 1);
            let concat: Batch = batches.concat();
            let mut single = model.clone();
            let one = TrainConfig {
                batches_per_update: 1,
                ..cfg
            };
            accumulate_and_update(&mut single, &[concat], &one).unwrap();
            worst = worst.max(relative_difference(delayed.params(), single.params()));
        }
    }
    assert!(worst <= 1e-10, "relative difference {worst}");
}

#[test]
fn gradient_is_linear_in_batches() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for seed in 0..20 {
        let model = ToyModel::random(6, 3, 0.7, seed);
        let batches = random_batches(&mut rng, 6, 3);
        let (whole, loss, n) = model.backward(&batches.concat()).unwrap();
        let mut sum = vec![0.0; whole.len()];
        let (mut loss_sum, mut n_sum) = (0.0, 0);
        for b in &batches {
            let (g, l, k) = model.backward(b).unwrap();
            sum.iter_mut().zip(&g).for_each(|(s, g)| *s += g);
            loss_sum += l;
            n_sum += k;
        }
        assert_eq!(n, n_sum);
        assert!((loss - loss_sum).abs() <= 1e-12 * loss.abs());
        assert!(relative_difference(&sum, &whole) <= 1e-12);
    }
}

/// Max over blocks of ‖g − fd‖∞ / ‖fd‖∞ with central differences at `eps`.
fn gradient_check(model: &ToyModel, batch: &[Vec<TokenId>], eps: f64) -> f64 {
    let (g, _, _) = model.backward(batch).unwrap();
    let mut m = model.clone();
    let mut worst: f64 = 0.0;
    for block in model.blocks() {
        let (mut err, mut scale): (f64, f64) = (0.0, 0.0);
        for i in block.range() {
            let orig = m.params()[i];
            m.params_mut()[i] = orig + eps;
            let up = m.forward_loss(batch).unwrap().0;
            m.params_mut()[i] = orig - eps;
            let down = m.forward_loss(batch).unwrap().0;
            m.params_mut()[i] = orig;
            let fd = (up - down) / (2.0 * eps);
            err = err.max((g[i] - fd).abs());
            scale = scale.max(fd.abs());
        }
        worst = worst.max(err / scale.max(1e-12));
    }
    worst
}

#[test]
fn backward_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for seed in 0..20 {
        let v = rng.gen_range(3..8);
        let d = rng.gen_range(1..5);
        let model = ToyModel::random(v, d, 1.0, seed);
        let batch = random_batches(&mut rng, v, 1).remove(0);
        let err = gradient_check(&model, &batch, 1e-4);
        assert!(err < 1e-4, "model {seed}: relative error {err}");
    }
}

#[test]
fn averaging_matches_summation() {
    let models: Vec<ToyModel> = (0..7).map(|s| ToyModel::random(5, 3, 2.0, s)).collect();
    let avg = average_checkpoints(&models).unwrap();
    for i in 0..avg.params().len() {
        let mut total = 0.0;
        for m in &models {
            total += m.params()[i];
        }
        assert!((avg.params()[i] - total / 7.0).abs() <= 1e-12);
    }
}

#[test]
fn training_is_deterministic_and_normalized() {
    let vocab = Vocab::from_tokens(["x", "y", "z"]);
    let corpus: Vec<Vec<TokenId>> = (0..20).map(|i| vec![2 + (i % 3), 3, 4, 2 + (i % 2)]).collect();
    let cfg = TrainConfig {
        batch_size_tokens: 12,
        batches_per_update: 2,
        learning_rate: 0.5,
        max_steps: 30,
        hidden: 6,
        seed: 3,
        average_last: 5,
        ..TrainConfig::default()
    };
    let a = train(&corpus, vocab.clone(), &cfg).unwrap();
    let b = train(&corpus, vocab, &cfg).unwrap();
    assert_eq!(a.scorer.model(), b.scorer.model());
    assert_eq!(a.log.last().unwrap().loss.to_bits(), b.log.last().unwrap().loss.to_bits());
    let s = &a.scorer;
    let mut state = s.initial_state();
    for t in [2, 3, 4, 2, 4] {
        assert!((probability_mass(&s.score_next(&state)) - 1.0).abs() < 1e-9);
        state = s.advance(&state, t);
    }
}

proptest! {
    #[test]
    fn batches_respect_the_budget(
        lens in prop::collection::vec(0usize..20, 1..60),
        extra in 0usize..40,
    ) {
        let budget = lens.iter().copied().max().unwrap().max(1) + extra;
        let corpus: Vec<Vec<TokenId>> = lens.iter().map(|&n| vec![2; n]).collect();
        let batches = batch_corpus(&corpus, budget).unwrap();
        let mut total = 0;
        for b in &batches {
            prop_assert!(!b.is_empty());
            prop_assert!(padded_tokens(b) <= budget);
            total += b.len();
        }
        prop_assert_eq!(total, corpus.len());
    }

    #[test]
    fn longer_sequences_mean_fewer_per_batch(short in 1usize..10, factor in 2usize..5) {
        let budget = 200;
        let long = short * factor;
        let per_batch = |n: usize| batch_corpus(&vec![vec![2; n]; 50], budget).unwrap()[0].len();
        prop_assert!(per_batch(long) <= per_batch(short));
    }
}
