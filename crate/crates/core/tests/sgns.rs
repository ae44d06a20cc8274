mod common;

use litkg::sgns::{build_vocab, pair_loss, sample_pairs, sigmoid, train, train_with};
use litkg::{SgnsParams, WalkCorpus};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let err = common::sgns_gradient_error(&mut rng, 8, 3, 1e-5);
        assert!(err < 1e-6, "relative error {err}");
    }
}

#[test]
fn gradient_holds_in_saturated_regime() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for d in [1, 4, 16] {
        let err = common::sgns_gradient_error(&mut rng, d, 5, 1e-5);
        assert!(err < 1e-6);
    }
    let big = vec![40.0; 4];
    let loss = pair_loss(&big, &big, &[&big]);
    assert!(loss.is_finite() && loss > 6000.0);
}

#[test]
fn two_node_walks_learn_the_pair() {
    let walks: Vec<Vec<&str>> = (0..50)
        .map(|i| (0..12).map(|j| if (i + j) % 2 == 0 { "a" } else { "b" }).collect())
        .collect();
    let corpus = WalkCorpus::from_sequences(&walks);
    let params = SgnsParams { dims: 8, window: 1, negatives: 2, epochs: 20, lr0: 0.05, seed: 3, ..Default::default() };
    let emb = train(&corpus, &params).unwrap();
    let a = emb.index["a"];
    let b = emb.index["b"];
    let score = |u: &[f64], v: &[f64]| sigmoid(u.iter().zip(v).map(|(x, y)| x * y).sum());
    assert!(score(emb.vector(a), emb.context_vector(b)) > 0.9);
    assert!(score(emb.vector(b), emb.context_vector(a)) > 0.9);
}

#[test]
fn barbell_cliques_separate() {
    let (intra, inter) = common::clique_similarity(&common::barbell_embedding(7), 10);
    assert!(intra > inter, "intra {intra} inter {inter}");
}

#[test]
fn loss_falls_during_training() {
    let graph = litkg::build_graph(&common::barbell_corpus(10));
    let walks = litkg::walk::walk_graph(&graph, &litkg::WalkParams { seed: 4, ..Default::default() }).unwrap();
    let params = SgnsParams { dims: 16, epochs: 5, seed: 4, ..Default::default() };
    let vocab = build_vocab(&walks, params.unigram_power).unwrap();
    let samples = sample_pairs(&walks, &vocab, &params, 2000, 99);
    let mut losses = Vec::new();
    let emb = train_with(&walks, &params, |_, m| losses.push(m.mean_loss(&samples))).unwrap();
    let initial = (1.0 + params.negatives as f64) * std::f64::consts::LN_2;
    assert_eq!(losses.len(), 5);
    assert!(losses[0] < initial);
    assert!(losses[4] < losses[0], "{losses:?}");
    assert!(emb.is_finite());
}

#[test]
fn serial_training_is_reproducible() {
    let emb = |seed| common::barbell_embedding(seed);
    assert_eq!(emb(5).input, emb(5).input);
    assert_ne!(emb(5).input, emb(6).input);
}
