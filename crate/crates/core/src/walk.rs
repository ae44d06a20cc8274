//! node2vec-style biased random walks over the co-occurrence graph.
//!
//! From the current node `v`, reached from `t`, the next node `x` is drawn
//! with probability proportional to `w(v, x) * bias(t, x)` where the bias is
//! `1/p` when `x == t`, `1` when `x` is also a neighbor of `t`, and `1/q`
//! otherwise. The first step of a walk has no predecessor and uses the edge
//! weights alone.
//!
//! # Random streams
//!
//! Each walk draws from its own ChaCha8 stream keyed by
//! `(seed, start node index, walk index)`, so corpora do not depend on the
//! number of worker threads. The 32-byte ChaCha key is built from SplitMix64:
//!
//! ```text
//! base  = splitmix64(splitmix64(splitmix64(seed) ^ node) ^ walk)
//! key_i = splitmix64(base + i)   for i in 0..4, little-endian
//! ```
//!
//! Start nodes are indexed in ascending concept-id order.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alias::AliasTable;
use crate::error::{Error, Result};
use crate::graph::KnowledgeGraph;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkParams {
    /// Steps per walk; a complete walk visits `walk_length + 1` nodes.
    pub walk_length: usize,
    pub walks_per_node: usize,
    pub return_param: f64,
    pub inout_param: f64,
    pub seed: u64,
    /// Build every second-order table up front instead of on first use.
    pub eager: bool,
}

impl Default for WalkParams {
    fn default() -> Self {
        WalkParams {
            walk_length: 10,
            walks_per_node: 10,
            return_param: 1.0,
            inout_param: 1.0,
            seed: 0,
            eager: false,
        }
    }
}

impl WalkParams {
    pub fn validate(&self) -> Result<()> {
        if self.walk_length < 1 {
            return Err(Error::InvalidParameter("walk_length must be >= 1".into()));
        }
        if self.walks_per_node < 1 {
            return Err(Error::InvalidParameter("walks_per_node must be >= 1".into()));
        }
        if !(self.return_param > 0.0 && self.return_param.is_finite()) {
            return Err(Error::InvalidParameter("return parameter p must be > 0".into()));
        }
        if !(self.inout_param > 0.0 && self.inout_param.is_finite()) {
            return Err(Error::InvalidParameter("in-out parameter q must be > 0".into()));
        }
        Ok(())
    }

    fn is_unbiased(&self) -> bool {
        self.return_param == 1.0 && self.inout_param == 1.0
    }
}

/// Dense, index-based view of a graph for walking.
#[derive(Debug, Clone)]
pub struct WalkGraph {
    ids: Vec<String>,
    /// Per node, (neighbor index, weight) sorted by neighbor index.
    neighbors: Vec<Vec<(u32, f64)>>,
}

impl WalkGraph {
    pub fn from_graph(graph: &KnowledgeGraph) -> Self {
        let ids: Vec<String> = graph.nodes.keys().cloned().collect();
        let index: HashMap<&str, u32> = ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i as u32))
            .collect();
        let neighbors = ids
            .iter()
            .map(|id| {
                let mut list: Vec<(u32, f64)> = graph
                    .neighbors(id)
                    .iter()
                    .map(|(n, w)| (index[n.as_str()], *w as f64))
                    .collect();
                list.sort_by_key(|&(n, _)| n);
                list
            })
            .collect();
        WalkGraph { ids, neighbors }
    }

    /// Builds directly from weighted undirected edges over named nodes.
    pub fn from_edges(ids: Vec<String>, edges: &[(usize, usize, f64)]) -> Self {
        let mut neighbors = vec![Vec::new(); ids.len()];
        for &(a, b, w) in edges {
            neighbors[a].push((b as u32, w));
            neighbors[b].push((a as u32, w));
        }
        for list in &mut neighbors {
            list.sort_by_key(|&(n, _)| n);
        }
        WalkGraph { ids, neighbors }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn neighbors(&self, node: usize) -> &[(u32, f64)] {
        &self.neighbors[node]
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.neighbors[a]
            .binary_search_by_key(&(b as u32), |&(n, _)| n)
            .is_ok()
    }
}

type EdgeKey = (u32, u32);

pub struct TransitionTables {
    return_param: f64,
    inout_param: f64,
    first_order: Vec<Option<AliasTable>>,
    second_order: RwLock<HashMap<EdgeKey, Arc<AliasTable>>>,
}

impl TransitionTables {
    pub fn first_order(&self, node: usize) -> Option<&AliasTable> {
        self.first_order[node].as_ref()
    }

    /// Unnormalized second-order weights over `cur`'s neighbors after arriving from `prev`.
    pub fn second_order_weights(&self, graph: &WalkGraph, prev: usize, cur: usize) -> Vec<f64> {
        graph
            .neighbors(cur)
            .iter()
            .map(|&(x, w)| {
                let x = x as usize;
                let bias = if x == prev {
                    1.0 / self.return_param
                } else if graph.has_edge(prev, x) {
                    1.0
                } else {
                    1.0 / self.inout_param
                };
                w * bias
            })
            .collect()
    }

    /// Alias table for the step out of `cur` after arriving from `prev`,
    /// built on first use and cached.
    pub fn second_order(&self, graph: &WalkGraph, prev: usize, cur: usize) -> Option<Arc<AliasTable>> {
        let key = (prev as u32, cur as u32);
        if let Some(t) = self.second_order.read().expect("cache poisoned").get(&key) {
            return Some(Arc::clone(t));
        }
        let table = Arc::new(AliasTable::new(&self.second_order_weights(graph, prev, cur))?);
        let mut cache = self.second_order.write().expect("cache poisoned");
        Some(Arc::clone(cache.entry(key).or_insert(table)))
    }

    pub fn cached_second_order(&self) -> usize {
        self.second_order.read().expect("cache poisoned").len()
    }
}

pub fn precompute_transitions(graph: &WalkGraph, params: &WalkParams) -> Result<TransitionTables> {
    params.validate()?;
    let first_order = graph
        .neighbors
        .iter()
        .map(|list| {
            let weights: Vec<f64> = list.iter().map(|&(_, w)| w).collect();
            AliasTable::new(&weights)
        })
        .collect();
    let tables = TransitionTables {
        return_param: params.return_param,
        inout_param: params.inout_param,
        first_order,
        second_order: RwLock::new(HashMap::new()),
    };
    if params.eager && !params.is_unbiased() {
        let built: Vec<(EdgeKey, Arc<AliasTable>)> = (0..graph.len())
            .into_par_iter()
            .flat_map_iter(|t| {
                let tables = &tables;
                graph.neighbors(t).iter().filter_map(move |&(v, _)| {
                    let w = tables.second_order_weights(graph, t, v as usize);
                    AliasTable::new(&w).map(|a| ((t as u32, v), Arc::new(a)))
                })
            })
            .collect();
        tables.second_order.write().expect("cache poisoned").extend(built);
    }
    Ok(tables)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkCorpus {
    /// Node ids; walks hold indices into this list.
    pub ids: Vec<String>,
    pub walks: Vec<Vec<u32>>,
    pub params: WalkParams,
}

impl WalkCorpus {
    pub fn walk_ids(&self, i: usize) -> impl Iterator<Item = &str> {
        self.walks[i].iter().map(|&n| self.ids[n as usize].as_str())
    }

    pub fn token_count(&self) -> usize {
        self.walks.iter().map(Vec::len).sum()
    }

    /// One walk per line, space-separated concept ids.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for i in 0..self.walks.len() {
            let line: Vec<&str> = self.walk_ids(i).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    /// Builds a corpus from token sequences, e.g. a walk dump or a test fixture.
    pub fn from_sequences<S: AsRef<str>>(sequences: &[Vec<S>]) -> Self {
        let mut ids: Vec<String> = sequences
            .iter()
            .flatten()
            .map(|s| s.as_ref().to_string())
            .collect();
        ids.sort();
        ids.dedup();
        let index: HashMap<&str, u32> = ids
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i as u32))
            .collect();
        let walks = sequences
            .iter()
            .map(|w| w.iter().map(|s| index[s.as_ref()]).collect())
            .collect();
        WalkCorpus {
            ids,
            walks,
            params: WalkParams::default(),
        }
    }

    pub fn from_text(text: &str) -> Self {
        let seqs: Vec<Vec<&str>> = text
            .lines()
            .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
            .map(|l| l.split_whitespace().collect())
            .collect();
        WalkCorpus::from_sequences(&seqs)
    }
}

pub(crate) fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream for one walk; see the module docs for the derivation.
pub fn walk_rng(seed: u64, node: u64, walk: u64) -> ChaCha8Rng {
    let base = splitmix64(splitmix64(splitmix64(seed) ^ node) ^ walk);
    let mut key = [0u8; 32];
    for (i, chunk) in key.chunks_exact_mut(8).enumerate() {
        chunk.copy_from_slice(&splitmix64(base.wrapping_add(i as u64)).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

fn walk_from(
    graph: &WalkGraph,
    tables: &TransitionTables,
    params: &WalkParams,
    start: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<u32> {
    let mut walk = Vec::with_capacity(params.walk_length + 1);
    walk.push(start as u32);
    let unbiased = params.is_unbiased();
    let mut prev: Option<usize> = None;
    let mut cur = start;
    for _ in 0..params.walk_length {
        let next = match prev {
            Some(t) if !unbiased => tables
                .second_order(graph, t, cur)
                .map(|a| graph.neighbors(cur)[a.sample(rng)].0 as usize),
            _ => tables
                .first_order(cur)
                .map(|a| graph.neighbors(cur)[a.sample(rng)].0 as usize),
        };
        let Some(next) = next else { break };
        walk.push(next as u32);
        prev = Some(cur);
        cur = next;
    }
    walk
}

/// Generates `walks_per_node` walks from every node, ordered by walk round
/// then start node. Output is identical for any thread count.
pub fn generate_walks(graph: &WalkGraph, tables: &TransitionTables, params: &WalkParams) -> Result<WalkCorpus> {
    params.validate()?;
    let n = graph.len();
    let walks = (0..params.walks_per_node * n)
        .into_par_iter()
        .map(|job| {
            let (round, node) = (job / n, job % n);
            let mut rng = walk_rng(params.seed, node as u64, round as u64);
            walk_from(graph, tables, params, node, &mut rng)
        })
        .collect();
    Ok(WalkCorpus {
        ids: graph.ids.clone(),
        walks,
        params: params.clone(),
    })
}

/// Convenience: tables plus walks straight from a knowledge graph.
pub fn walk_graph(graph: &KnowledgeGraph, params: &WalkParams) -> Result<WalkCorpus> {
    let wg = WalkGraph::from_graph(graph);
    let tables = precompute_transitions(&wg, params)?;
    generate_walks(&wg, &tables, params)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("N{i}")).collect()
    }

    fn params(p: f64, q: f64, length: usize) -> WalkParams {
        WalkParams {
            walk_length: length,
            walks_per_node: 3,
            return_param: p,
            inout_param: q,
            seed: 11,
            eager: false,
        }
    }

    #[test]
    fn triangle_uniform() {
        let g = WalkGraph::from_edges(names(3), &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]);
        let t = precompute_transitions(&g, &params(1.0, 1.0, 5)).unwrap();
        for v in 0..3 {
            for p in t.first_order(v).unwrap().probabilities() {
                assert!((p - 0.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn star_weights_normalize() {
        // D=0, A=1, B=2
        let g = WalkGraph::from_edges(names(3), &[(0, 1, 3.0), (0, 2, 1.0)]);
        let t = precompute_transitions(&g, &params(1.0, 1.0, 5)).unwrap();
        let probs = t.first_order(0).unwrap().probabilities();
        assert!((probs[0] - 0.75).abs() < 1e-12);
        assert!((probs[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn path_bias_by_hand() {
        // A=0, B=1, C=2; previous A, current B. Bias: return 1/p = 2, out 1/q = 0.5.
        let g = WalkGraph::from_edges(names(3), &[(0, 1, 1.0), (1, 2, 1.0)]);
        let t = precompute_transitions(&g, &params(0.5, 2.0, 5)).unwrap();
        let probs = t.second_order(&g, 0, 1).unwrap().probabilities();
        let expected_return = 2.0 / (2.0 + 0.5);
        assert!((expected_return - 0.8f64).abs() < 1e-15);
        assert!((probs[0] - 0.8).abs() < 1e-12);
        assert!((probs[1] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn unbiased_second_order_equals_first_order() {
        let g = WalkGraph::from_edges(
            names(4),
            &[(0, 1, 2.0), (1, 2, 5.0), (0, 2, 1.0), (1, 3, 7.0)],
        );
        let t = precompute_transitions(&g, &params(1.0, 1.0, 5)).unwrap();
        for v in 0..4 {
            let first = t.first_order(v).unwrap().probabilities();
            for &(prev, _) in g.neighbors(v) {
                let second = t.second_order(&g, prev as usize, v).unwrap().probabilities();
                for (a, b) in first.iter().zip(&second) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn single_edge_alternates() {
        let g = WalkGraph::from_edges(names(2), &[(0, 1, 1.0)]);
        let p = params(1.0, 1.0, 3);
        let t = precompute_transitions(&g, &p).unwrap();
        let corpus = generate_walks(&g, &t, &p).unwrap();
        for (i, walk) in corpus.walks.iter().enumerate() {
            let start = (i % 2) as u32;
            assert_eq!(walk, &vec![start, 1 - start, start, 1 - start]);
        }
    }

    #[test]
    fn isolated_node_walk_is_trivial() {
        let g = WalkGraph::from_edges(names(1), &[]);
        let p = params(0.5, 2.0, 10);
        let t = precompute_transitions(&g, &p).unwrap();
        let corpus = generate_walks(&g, &t, &p).unwrap();
        assert_eq!(corpus.walks.len(), 3);
        assert!(corpus.walks.iter().all(|w| w == &vec![0]));
    }

    #[test]
    fn empty_graph_gives_empty_corpus() {
        let g = WalkGraph::from_edges(Vec::new(), &[]);
        let p = params(1.0, 1.0, 10);
        let t = precompute_transitions(&g, &p).unwrap();
        assert!(generate_walks(&g, &t, &p).unwrap().walks.is_empty());
    }

    #[test]
    fn eager_and_lazy_agree() {
        let g = WalkGraph::from_edges(
            names(5),
            &[(0, 1, 1.0), (1, 2, 2.0), (2, 3, 1.0), (3, 4, 4.0), (4, 0, 1.0), (0, 2, 3.0)],
        );
        let lazy = params(0.25, 4.0, 12);
        let eager = WalkParams { eager: true, ..lazy.clone() };
        let tl = precompute_transitions(&g, &lazy).unwrap();
        let te = precompute_transitions(&g, &eager).unwrap();
        assert_eq!(te.cached_second_order(), 12);
        assert_eq!(
            generate_walks(&g, &tl, &lazy).unwrap().walks,
            generate_walks(&g, &te, &eager).unwrap().walks
        );
    }

    #[test]
    fn rejects_bad_params() {
        let g = WalkGraph::from_edges(names(1), &[]);
        for p in [params(0.0, 1.0, 3), params(1.0, -1.0, 3), params(1.0, 1.0, 0)] {
            assert!(precompute_transitions(&g, &p).is_err());
        }
    }

    #[test]
    fn text_dump_round_trip() {
        let g = WalkGraph::from_edges(names(3), &[(0, 1, 1.0), (1, 2, 1.0)]);
        let p = params(1.0, 1.0, 4);
        let t = precompute_transitions(&g, &p).unwrap();
        let corpus = generate_walks(&g, &t, &p).unwrap();
        let back = WalkCorpus::from_text(&corpus.to_text());
        assert_eq!(back.walks, corpus.walks);
        assert_eq!(back.ids, corpus.ids);
    }
}
