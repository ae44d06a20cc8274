mod common;

use litkg::{build_graph, Corpus, KnowledgeGraph};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn corpus_from_seed(seed: u64, docs: usize, concepts: usize, mentions: usize) -> (Corpus, Vec<common::Concept>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool = common::concept_pool(&mut rng, concepts);
    (common::random_corpus(&mut rng, docs, &pool, mentions), pool)
}

#[test]
fn matches_nested_loop_oracle() {
    for seed in 0..20 {
        let (corpus, _) = corpus_from_seed(seed, 200, 30, 10);
        let graph = build_graph(&corpus);
        assert_eq!(common::graph_edges(&graph), common::brute_force_edges(&corpus), "seed {seed}");
    }
}

#[test]
fn nodes_are_exactly_edge_endpoints() {
    let (corpus, _) = corpus_from_seed(3, 300, 40, 8);
    let graph = build_graph(&corpus);
    let mut endpoints = std::collections::BTreeSet::new();
    for (a, b) in graph.edges.keys() {
        endpoints.insert(a.clone());
        endpoints.insert(b.clone());
    }
    let nodes: std::collections::BTreeSet<_> = graph.nodes.keys().cloned().collect();
    assert_eq!(nodes, endpoints);
    for node in graph.nodes.values() {
        let touching: std::collections::BTreeSet<&String> = graph
            .edges
            .values()
            .filter(|e| e.disease_id == node.concept_id || e.other_id == node.concept_id)
            .flat_map(|e| e.pmids.iter())
            .collect();
        assert_eq!(node.doc_frequency as usize, touching.len(), "{}", node.concept_id);
    }
}

#[test]
fn document_order_does_not_matter() {
    let (corpus, _) = corpus_from_seed(11, 150, 25, 10);
    let mut docs = corpus.docs.clone();
    docs.shuffle(&mut ChaCha8Rng::seed_from_u64(1));
    let shuffled = Corpus::from_docs(docs);
    assert_eq!(build_graph(&corpus), build_graph(&shuffled));
    assert_eq!(build_graph(&corpus).to_json(None), build_graph(&shuffled).to_json(None));
}

fn split(corpus: &Corpus, parts: usize, seed: u64) -> Vec<Corpus> {
    let mut docs = corpus.docs.clone();
    docs.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let chunk = docs.len().div_ceil(parts);
    docs.chunks(chunk).map(|c| Corpus::from_docs(c.to_vec())).collect()
}

#[test]
fn merge_of_parts_equals_whole() {
    let (corpus, _) = corpus_from_seed(5, 240, 30, 9);
    let whole = build_graph(&corpus);
    let parts: Vec<KnowledgeGraph> = split(&corpus, 3, 2).iter().map(build_graph).collect();
    let ab_c = parts[0].merge(&parts[1]).unwrap().merge(&parts[2]).unwrap();
    let a_bc = parts[0].merge(&parts[1].merge(&parts[2]).unwrap()).unwrap();
    let ba = parts[1].merge(&parts[0]).unwrap();
    assert_eq!(ab_c, whole);
    assert_eq!(a_bc, whole);
    assert_eq!(ba, parts[0].merge(&parts[1]).unwrap());
    assert_eq!(whole.corpus_fingerprint, corpus.fingerprint());
}

#[test]
fn merge_rejects_shared_abstracts() {
    let (corpus, _) = corpus_from_seed(6, 50, 10, 8);
    let g = build_graph(&corpus);
    if g.edge_count() > 0 {
        assert!(matches!(g.merge(&g), Err(litkg::Error::OverlappingPmids(_))));
    }
}

#[test]
fn json_round_trip() {
    for seed in 0..10 {
        let (corpus, _) = corpus_from_seed(seed, 100, 20, 8);
        let g = build_graph(&corpus);
        let text = g.to_json(Some(&serde_json::json!({"tool": "litkg"})));
        let back = KnowledgeGraph::from_json(&text).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.to_json(Some(&serde_json::json!({"tool": "litkg"}))), text);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn oracle_on_small_corpora(seed in any::<u64>(), docs in 0usize..40, concepts in 1usize..12, mentions in 0usize..6) {
        let (corpus, _) = corpus_from_seed(seed, docs, concepts, mentions);
        let graph = build_graph(&corpus);
        prop_assert_eq!(common::graph_edges(&graph), common::brute_force_edges(&corpus));
        for ((a, b), e) in &graph.edges {
            prop_assert!(a.starts_with("Disease:"));
            if b.starts_with("Disease:") {
                prop_assert!(a < b);
            }
            prop_assert_eq!(graph.relation_class(e).as_str().starts_with("disease-"), true);
        }
    }
}
