//! Corpus and graph statistics, top co-occurring pairs, and nearest-neighbor
//! lookups in embedding space.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{KnowledgeGraph, RelationClass};
use crate::pubtator::{ConceptCategory, Corpus};
use crate::sgns::EmbeddingMatrix;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GraphStats {
    pub abstracts: usize,
    pub nodes_by_category: BTreeMap<ConceptCategory, usize>,
    pub edges_by_relation: BTreeMap<RelationClass, usize>,
    /// Abstracts supporting at least one Disease–SNP&Mutation edge.
    pub mutation_disease_abstracts: usize,
    pub total_nodes: usize,
    pub total_edges: usize,
}

pub fn stats(graph: &KnowledgeGraph, corpus: &Corpus) -> Result<GraphStats> {
    let fp = corpus.fingerprint();
    if graph.corpus_fingerprint != fp {
        return Err(Error::ProvenanceMismatch {
            graph: graph.corpus_fingerprint.clone(),
            corpus: fp,
        });
    }
    let mut nodes_by_category: BTreeMap<ConceptCategory, usize> =
        ConceptCategory::ALL.iter().map(|&c| (c, 0)).collect();
    for node in graph.nodes.values() {
        *nodes_by_category.entry(node.category).or_default() += 1;
    }
    let mut edges_by_relation: BTreeMap<RelationClass, usize> =
        RelationClass::ALL.iter().map(|&r| (r, 0)).collect();
    let mut mutation_pmids = BTreeSet::new();
    for edge in graph.edges.values() {
        let class = graph.relation_class(edge);
        *edges_by_relation.entry(class).or_default() += 1;
        if class == RelationClass::DiseaseSnpMutation {
            mutation_pmids.extend(edge.pmids.iter());
        }
    }
    Ok(GraphStats {
        abstracts: corpus.docs.len(),
        nodes_by_category,
        edges_by_relation,
        mutation_disease_abstracts: mutation_pmids.len(),
        total_nodes: graph.node_count(),
        total_edges: graph.edge_count(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PairRow {
    pub disease_id: String,
    pub other_id: String,
    pub disease_name: String,
    pub other_name: String,
    pub weight: u64,
}

/// The `k` heaviest edges of one relation class. Ties are broken by
/// (disease name, other name), then by ids.
pub fn top_pairs(graph: &KnowledgeGraph, relation: RelationClass, k: usize) -> Result<Vec<PairRow>> {
    if k < 1 {
        return Err(Error::InvalidParameter("k must be >= 1".into()));
    }
    let mut rows: Vec<PairRow> = graph
        .edges
        .values()
        .filter(|e| graph.relation_class(e) == relation)
        .map(|e| PairRow {
            disease_id: e.disease_id.clone(),
            other_id: e.other_id.clone(),
            disease_name: graph.name_of(&e.disease_id).to_string(),
            other_name: graph.name_of(&e.other_id).to_string(),
            weight: e.weight,
        })
        .collect();
    rows.sort_by(|a, b| {
        b.weight
            .cmp(&a.weight)
            .then_with(|| a.disease_name.cmp(&b.disease_name))
            .then_with(|| a.other_name.cmp(&b.other_name))
            .then_with(|| a.disease_id.cmp(&b.disease_id))
            .then_with(|| a.other_id.cmp(&b.other_id))
    });
    rows.truncate(k);
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Euclidean,
    Cosine,
}

impl Metric {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::Euclidean => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            Metric::Cosine => {
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
                let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
                if na == 0.0 || nb == 0.0 {
                    1.0
                } else {
                    1.0 - dot / (na * nb)
                }
            }
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Euclidean => "euclidean",
            Metric::Cosine => "cosine",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "euclidean" | "l2" => Ok(Metric::Euclidean),
            "cosine" => Ok(Metric::Cosine),
            _ => Err(Error::InvalidParameter(format!("unknown metric {s:?}"))),
        }
    }
}

/// Display names and categories for concept ids.
#[derive(Debug, Clone, Default)]
pub struct ConceptCatalog {
    entries: BTreeMap<String, (String, ConceptCategory)>,
    /// Lowercased surface form → concept ids that used it.
    surfaces: BTreeMap<String, BTreeSet<String>>,
}

impl ConceptCatalog {
    pub fn from_graph(graph: &KnowledgeGraph) -> Self {
        let mut surfaces: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for n in graph.nodes.values() {
            for s in n.surfaces.keys() {
                surfaces.entry(s.to_lowercase()).or_default().insert(n.concept_id.clone());
            }
        }
        ConceptCatalog {
            entries: graph
                .nodes
                .values()
                .map(|n| (n.concept_id.clone(), (n.name.clone(), n.category)))
                .collect(),
            surfaces,
        }
    }

    pub fn name<'a>(&'a self, id: &'a str) -> &'a str {
        self.entries.get(id).map(|(n, _)| n.as_str()).unwrap_or(id)
    }

    pub fn category(&self, id: &str) -> Option<ConceptCategory> {
        self.entries
            .get(id)
            .map(|(_, c)| *c)
            .or_else(|| ConceptCategory::from_concept_id(id))
    }

    /// Resolves a user query given as an id, a display name, or any surface
    /// form seen in the corpus (case-insensitive). Display names win; an
    /// ambiguous surface resolves to the smallest id.
    pub fn resolve<'a>(&'a self, query: &'a str) -> &'a str {
        if self.entries.contains_key(query) {
            return query;
        }
        let lower = query.to_lowercase();
        self.entries
            .iter()
            .find(|(_, (name, _))| name.to_lowercase() == lower)
            .map(|(id, _)| id.as_str())
            .or_else(|| self.surfaces.get(&lower).and_then(|ids| ids.iter().next()).map(String::as_str))
            .unwrap_or(query)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Neighbor {
    pub concept_id: String,
    pub name: String,
    pub category: Option<ConceptCategory>,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NeighborResult {
    pub query: String,
    pub metric: Metric,
    pub neighbors: Vec<Neighbor>,
}

fn suggestions(embeddings: &EmbeddingMatrix, catalog: &ConceptCatalog, query: &str) -> Vec<String> {
    let q = query.to_lowercase();
    let mut scored: Vec<(f64, &str)> = embeddings
        .ids
        .iter()
        .map(|id| {
            let name = catalog.name(id).to_lowercase();
            let score = strsim::jaro_winkler(&q, &name).max(strsim::jaro_winkler(&q, &id.to_lowercase()));
            (score, id.as_str())
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    scored
        .into_iter()
        .take(5)
        .map(|(_, id)| match catalog.name(id) {
            name if name == id => id.to_string(),
            name => format!("{id} ({name})"),
        })
        .collect()
}

/// Exact k-nearest-neighbor scan. The query itself is excluded; ties are
/// ordered by concept id.
pub fn nearest_neighbors(
    embeddings: &EmbeddingMatrix,
    catalog: &ConceptCatalog,
    query: &str,
    k: usize,
    metric: Metric,
) -> Result<NeighborResult> {
    if k < 1 {
        return Err(Error::InvalidParameter("k must be >= 1".into()));
    }
    let id = catalog.resolve(query);
    let Some(&row) = embeddings.index.get(id) else {
        return Err(Error::UnknownConcept {
            id: query.to_string(),
            suggestions: suggestions(embeddings, catalog, query),
        });
    };
    let q = embeddings.vector(row);
    let mut scored: Vec<(f64, usize)> = (0..embeddings.len())
        .filter(|&r| r != row)
        .map(|r| (metric.distance(q, embeddings.vector(r)), r))
        .collect();
    scored.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then_with(|| embeddings.ids[a.1].cmp(&embeddings.ids[b.1]))
    });
    scored.truncate(k);
    Ok(NeighborResult {
        query: id.to_string(),
        metric,
        neighbors: scored
            .into_iter()
            .map(|(distance, r)| {
                let cid = &embeddings.ids[r];
                Neighbor {
                    concept_id: cid.clone(),
                    name: catalog.name(cid).to_string(),
                    category: catalog.category(cid),
                    distance,
                }
            })
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HighlightedNeighbor {
    pub neighbor: Neighbor,
    pub diet_related: bool,
}

pub fn neighbor_highlight(result: &NeighborResult, lexicon: &HashSet<String>) -> Vec<HighlightedNeighbor> {
    result
        .neighbors
        .iter()
        .map(|n| HighlightedNeighbor {
            diet_related: lexicon.contains(&n.concept_id),
            neighbor: n.clone(),
        })
        .collect()
}

/// Lexicon file: one concept id per line; `#` starts a comment.
pub fn load_lexicon(path: &Path) -> Result<HashSet<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_lexicon(&text))
}

pub fn parse_lexicon(text: &str) -> HashSet<String> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}

/// Left-aligned plain-text table.
pub fn render_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        padded.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(header.to_vec());
    out.push_str(&line(widths.iter().map(|&w| "-".repeat(w)).collect::<Vec<_>>().iter().map(String::as_str).collect()));
    for row in rows {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
    }
    out
}
