//! Disease-centric co-occurrence knowledge graph.
//!
//! Every abstract links each Disease concept it mentions to every other
//! distinct concept in the same abstract. Edge weight counts supporting
//! abstracts, and each edge keeps the PMIDs that support it.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pubtator::{xor_into, ConceptCategory, Corpus};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptNode {
    pub concept_id: String,
    pub name: String,
    pub category: ConceptCategory,
    /// Abstracts in which this concept takes part in at least one edge.
    pub doc_frequency: u64,
    /// Surface form counts over those abstracts; `name` is derived from them.
    pub surfaces: BTreeMap<String, u64>,
}

impl ConceptNode {
    fn refresh_name(&mut self) {
        self.name = display_name(&self.surfaces).unwrap_or_else(|| self.concept_id.clone());
    }
}

/// Most frequent surface form, ties broken lexicographically.
pub fn display_name(surfaces: &BTreeMap<String, u64>) -> Option<String> {
    surfaces
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0)))
        .map(|(s, _)| s.clone())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoEdge {
    pub disease_id: String,
    pub other_id: String,
    pub weight: u64,
    pub pmids: BTreeSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RelationClass {
    DiseaseChemical,
    DiseaseGene,
    DiseaseSpecies,
    #[serde(rename = "disease-mutation")]
    DiseaseSnpMutation,
    DiseaseDisease,
}

impl RelationClass {
    pub const ALL: [RelationClass; 5] = [
        RelationClass::DiseaseChemical,
        RelationClass::DiseaseGene,
        RelationClass::DiseaseSpecies,
        RelationClass::DiseaseSnpMutation,
        RelationClass::DiseaseDisease,
    ];

    /// Class of an edge whose non-canonical endpoint has category `other`.
    pub fn for_other(other: ConceptCategory) -> Self {
        match other {
            ConceptCategory::Disease => RelationClass::DiseaseDisease,
            ConceptCategory::Chemical => RelationClass::DiseaseChemical,
            ConceptCategory::Gene => RelationClass::DiseaseGene,
            ConceptCategory::Species => RelationClass::DiseaseSpecies,
            ConceptCategory::SnpMutation => RelationClass::DiseaseSnpMutation,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RelationClass::DiseaseChemical => "disease-chemical",
            RelationClass::DiseaseGene => "disease-gene",
            RelationClass::DiseaseSpecies => "disease-species",
            RelationClass::DiseaseSnpMutation => "disease-mutation",
            RelationClass::DiseaseDisease => "disease-disease",
        }
    }
}

impl fmt::Display for RelationClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RelationClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace(['_', ' ', '&'], "-");
        let class = match norm.as_str() {
            "disease-chemical" | "chemical-disease" => RelationClass::DiseaseChemical,
            "disease-gene" | "gene-disease" => RelationClass::DiseaseGene,
            "disease-species" | "species-disease" => RelationClass::DiseaseSpecies,
            "disease-mutation" | "disease-snp-mutation" | "disease-snpmutation" | "mutation-disease"
            | "snp-mutation-disease" => RelationClass::DiseaseSnpMutation,
            "disease-disease" => RelationClass::DiseaseDisease,
            _ => return Err(Error::UnknownRelation(s.to_string())),
        };
        Ok(class)
    }
}

/// Canonical undirected orientation for a Disease endpoint `disease` and any
/// other concept. Disease-Disease pairs put the smaller id first.
pub fn canonical_pair(
    disease: &str,
    other: &str,
    other_category: ConceptCategory,
) -> (String, String) {
    if other_category == ConceptCategory::Disease && other < disease {
        (other.to_string(), disease.to_string())
    } else {
        (disease.to_string(), other.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct KnowledgeGraph {
    pub nodes: BTreeMap<String, ConceptNode>,
    pub edges: BTreeMap<(String, String), CoEdge>,
    adjacency: BTreeMap<String, Vec<(String, u64)>>,
    /// XOR fingerprint of the corpus documents this graph was built from.
    pub corpus_fingerprint: String,
}

impl KnowledgeGraph {
    pub fn empty() -> Self {
        KnowledgeGraph {
            corpus_fingerprint: Corpus::default().fingerprint(),
            ..Default::default()
        }
    }

    /// Assembles a graph from parts, validating edge invariants.
    pub fn from_parts(
        nodes: Vec<ConceptNode>,
        edges: Vec<CoEdge>,
        corpus_fingerprint: String,
    ) -> Result<Self> {
        let nodes: BTreeMap<String, ConceptNode> =
            nodes.into_iter().map(|n| (n.concept_id.clone(), n)).collect();
        let mut map = BTreeMap::new();
        for e in edges {
            let bad = |msg: &str| Error::parse("graph", format!("edge {}--{}: {msg}", e.disease_id, e.other_id));
            if e.disease_id == e.other_id {
                return Err(bad("self loop"));
            }
            if e.pmids.is_empty() || e.weight != e.pmids.len() as u64 {
                return Err(bad("weight must equal the number of pmids"));
            }
            let (Some(d), Some(o)) = (nodes.get(&e.disease_id), nodes.get(&e.other_id)) else {
                return Err(bad("endpoint missing from node list"));
            };
            if d.category != ConceptCategory::Disease {
                return Err(bad("first endpoint is not a Disease"));
            }
            if o.category == ConceptCategory::Disease && e.other_id < e.disease_id {
                return Err(bad("disease pair not in canonical order"));
            }
            let key = (e.disease_id.clone(), e.other_id.clone());
            if map.insert(key, e).is_some() {
                return Err(Error::parse("graph", "duplicate edge"));
            }
        }
        let mut graph = KnowledgeGraph {
            nodes,
            edges: map,
            adjacency: BTreeMap::new(),
            corpus_fingerprint,
        };
        graph.rebuild_adjacency();
        Ok(graph)
    }

    fn rebuild_adjacency(&mut self) {
        let mut adj: BTreeMap<String, Vec<(String, u64)>> = BTreeMap::new();
        for e in self.edges.values() {
            adj.entry(e.disease_id.clone())
                .or_default()
                .push((e.other_id.clone(), e.weight));
            adj.entry(e.other_id.clone())
                .or_default()
                .push((e.disease_id.clone(), e.weight));
        }
        for list in adj.values_mut() {
            list.sort();
        }
        self.adjacency = adj;
    }

    /// Neighbors of `id` as (neighbor, weight), sorted by neighbor id.
    pub fn neighbors(&self, id: &str) -> &[(String, u64)] {
        self.adjacency.get(id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn relation_class(&self, edge: &CoEdge) -> RelationClass {
        let category = self
            .nodes
            .get(&edge.other_id)
            .map(|n| n.category)
            .or_else(|| ConceptCategory::from_concept_id(&edge.other_id))
            .unwrap_or(ConceptCategory::Disease);
        RelationClass::for_other(category)
    }

    pub fn name_of<'a>(&'a self, id: &'a str) -> &'a str {
        self.nodes.get(id).map(|n| n.name.as_str()).unwrap_or(id)
    }

    /// Every PMID that supports at least one edge.
    pub fn pmids(&self) -> BTreeSet<&str> {
        self.edges
            .values()
            .flat_map(|e| e.pmids.iter().map(String::as_str))
            .collect()
    }

    /// Combines graphs built from disjoint PMID sets.
    pub fn merge(&self, other: &KnowledgeGraph) -> Result<KnowledgeGraph> {
        let mine = self.pmids();
        let overlap: Vec<String> = other
            .pmids()
            .into_iter()
            .filter(|p| mine.contains(p))
            .map(str::to_string)
            .collect();
        if !overlap.is_empty() {
            return Err(Error::OverlappingPmids(overlap));
        }

        let mut nodes = self.nodes.clone();
        for (id, node) in &other.nodes {
            match nodes.get_mut(id) {
                Some(existing) => {
                    existing.doc_frequency += node.doc_frequency;
                    for (s, c) in &node.surfaces {
                        *existing.surfaces.entry(s.clone()).or_default() += c;
                    }
                    existing.refresh_name();
                }
                None => {
                    nodes.insert(id.clone(), node.clone());
                }
            }
        }
        let mut edges = self.edges.clone();
        for (key, edge) in &other.edges {
            let entry = edges.entry(key.clone()).or_insert_with(|| CoEdge {
                disease_id: edge.disease_id.clone(),
                other_id: edge.other_id.clone(),
                weight: 0,
                pmids: BTreeSet::new(),
            });
            entry.pmids.extend(edge.pmids.iter().cloned());
            entry.weight = entry.pmids.len() as u64;
        }

        let mut fp = [0u8; 32];
        for g in [self, other] {
            let digest = decode_fingerprint(&g.corpus_fingerprint)?;
            xor_into(&mut fp, &digest);
        }
        let mut merged = KnowledgeGraph {
            nodes,
            edges,
            adjacency: BTreeMap::new(),
            corpus_fingerprint: hex::encode(fp),
        };
        merged.rebuild_adjacency();
        Ok(merged)
    }

    /// Deterministic JSON: nodes sorted by id, edges by canonical pair.
    pub fn to_json(&self, provenance: Option<&serde_json::Value>) -> String {
        let file = GraphFile {
            provenance: provenance.cloned(),
            corpus_fingerprint: self.corpus_fingerprint.clone(),
            nodes: self.nodes.values().cloned().collect(),
            edges: self.edges.values().cloned().collect(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("graph serialization is infallible");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: GraphFile =
            serde_json::from_str(text).map_err(|e| Error::parse("graph json", e.to_string()))?;
        decode_fingerprint(&file.corpus_fingerprint)?;
        KnowledgeGraph::from_parts(file.nodes, file.edges, file.corpus_fingerprint)
    }
}

fn decode_fingerprint(s: &str) -> Result<[u8; 32]> {
    let bytes = hex::decode(s).map_err(|e| Error::parse("corpus_fingerprint", e.to_string()))?;
    bytes
        .try_into()
        .map_err(|_| Error::parse("corpus_fingerprint", "expected 32 bytes"))
}

#[derive(Serialize, Deserialize)]
struct GraphFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<serde_json::Value>,
    corpus_fingerprint: String,
    nodes: Vec<ConceptNode>,
    edges: Vec<CoEdge>,
}

/// Builds the co-occurrence graph. Repeated mentions of a concept inside one
/// abstract count once; abstracts without a Disease contribute nothing.
pub fn build_graph(corpus: &Corpus) -> KnowledgeGraph {
    let mut nodes: BTreeMap<String, ConceptNode> = BTreeMap::new();
    let mut edges: BTreeMap<(String, String), CoEdge> = BTreeMap::new();

    for doc in &corpus.docs {
        let mut present: BTreeMap<&str, (ConceptCategory, BTreeMap<&str, u64>)> = BTreeMap::new();
        for m in &doc.mentions {
            let entry = present
                .entry(m.concept_id.as_str())
                .or_insert_with(|| (m.category, BTreeMap::new()));
            *entry.1.entry(m.surface.as_str()).or_default() += 1;
        }
        let has_disease = present.values().any(|(c, _)| *c == ConceptCategory::Disease);
        if !has_disease || present.len() < 2 {
            continue;
        }

        for (&d, (dcat, _)) in &present {
            if *dcat != ConceptCategory::Disease {
                continue;
            }
            for (&c, (ccat, _)) in &present {
                if c == d {
                    continue;
                }
                let key = canonical_pair(d, c, *ccat);
                let edge = edges.entry(key.clone()).or_insert_with(|| CoEdge {
                    disease_id: key.0,
                    other_id: key.1,
                    weight: 0,
                    pmids: BTreeSet::new(),
                });
                edge.pmids.insert(doc.pmid.clone());
            }
        }

        // With a disease and at least one other concept, every concept present
        // participates in some edge.
        for (&id, (category, surfaces)) in &present {
            let node = nodes.entry(id.to_string()).or_insert_with(|| ConceptNode {
                concept_id: id.to_string(),
                name: String::new(),
                category: *category,
                doc_frequency: 0,
                surfaces: BTreeMap::new(),
            });
            node.doc_frequency += 1;
            for (s, n) in surfaces {
                *node.surfaces.entry((*s).to_string()).or_default() += n;
            }
        }
    }

    if edges.is_empty() && !corpus.docs.is_empty() {
        log::warn!("corpus yields no disease co-occurrences; graph is empty");
    }
    for edge in edges.values_mut() {
        edge.weight = edge.pmids.len() as u64;
    }
    for node in nodes.values_mut() {
        node.refresh_name();
    }
    let mut graph = KnowledgeGraph {
        nodes,
        edges,
        adjacency: BTreeMap::new(),
        corpus_fingerprint: corpus.fingerprint(),
    };
    graph.rebuild_adjacency();
    graph
}
