//! Literature-mining toolkit: PubTator ingestion, a disease-centric
//! co-occurrence knowledge graph, node2vec walks with skip-gram embeddings,
//! exact t-SNE layouts, and the queries and exports built on top of them.

pub mod alias;
pub mod cli;
pub mod error;
pub mod export;
pub mod fetch;
pub mod formats;
pub mod graph;
pub mod pubtator;
pub mod query;
pub mod sgns;
pub mod tsne;
pub mod walk;

pub use error::{Error, Result};
pub use graph::{build_graph, CoEdge, ConceptNode, KnowledgeGraph, RelationClass};
pub use pubtator::{parse_pubtator, AbstractDoc, ConceptCategory, Corpus, EntityMention};
pub use sgns::{EmbeddingMatrix, SgnsParams};
pub use tsne::{ScatterLayout, TsneParams};
pub use walk::{WalkCorpus, WalkParams};
