#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use litkg::pubtator::normalize_concept_id;
use litkg::{AbstractDoc, ConceptCategory, Corpus, EntityMention, KnowledgeGraph};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/corpus50")
}

/// The PubTator type string a random concept uses, cycling through aliases
/// so mutation subtypes are exercised.
fn raw_type(category: ConceptCategory, k: usize) -> &'static str {
    match category {
        ConceptCategory::Disease => "Disease",
        ConceptCategory::Chemical => "Chemical",
        ConceptCategory::Gene => "Gene",
        ConceptCategory::Species => "Species",
        ConceptCategory::SnpMutation => ["SNP", "DNAMutation", "ProteinMutation"][k % 3],
    }
}

#[derive(Debug, Clone)]
pub struct Concept {
    pub raw_type: &'static str,
    pub raw_id: String,
    pub category: ConceptCategory,
    pub id: String,
    pub surfaces: Vec<String>,
}

/// `n` concepts, roughly a third of them diseases.
pub fn concept_pool<R: Rng>(rng: &mut R, n: usize) -> Vec<Concept> {
    (0..n)
        .map(|k| {
            let category = if rng.gen_bool(0.35) {
                ConceptCategory::Disease
            } else {
                *ConceptCategory::ALL[1..].choose(rng).unwrap()
            };
            let raw_id = format!("ID{k:03}");
            let surfaces = (0..rng.gen_range(1..=3)).map(|s| format!("term{k}x{s}")).collect();
            Concept {
                raw_type: raw_type(category, k),
                raw_id: raw_id.clone(),
                category,
                id: normalize_concept_id(category, &raw_id).unwrap(),
                surfaces,
            }
        })
        .collect()
}

/// Random corpus with consistent offsets: `docs` abstracts, each with up to
/// `max_mentions` mentions drawn from `concepts`.
pub fn random_corpus<R: Rng>(rng: &mut R, docs: usize, concepts: &[Concept], max_mentions: usize) -> Corpus {
    let mut pmids: BTreeSet<u32> = BTreeSet::new();
    while pmids.len() < docs {
        pmids.insert(rng.gen_range(1..10_000_000));
    }
    let mut pmids: Vec<u32> = pmids.into_iter().collect();
    pmids.shuffle(rng);
    let docs = pmids
        .into_iter()
        .map(|pmid| {
            let pmid = pmid.to_string();
            let title = format!("Title of {pmid}");
            let mut body = String::from("Intro.");
            let mut mentions = Vec::new();
            for _ in 0..rng.gen_range(0..=max_mentions) {
                let c = concepts.choose(rng).unwrap();
                let surface = c.surfaces.choose(rng).unwrap().clone();
                body.push(' ');
                let start = title.chars().count() + 1 + body.chars().count();
                body.push_str(&surface);
                mentions.push(EntityMention {
                    pmid: pmid.clone(),
                    start,
                    end: start + surface.chars().count(),
                    surface,
                    category: c.category,
                    concept_id: c.id.clone(),
                });
                body.push_str(" filler.");
            }
            let mut doc = AbstractDoc {
                pmid,
                title,
                body,
                mentions,
            };
            doc.sort_mentions();
            doc
        })
        .collect();
    Corpus::from_docs(docs)
}

/// Independent PubTator writer: raw type strings and raw ids recovered from
/// the concept pool.
pub fn write_pubtator(corpus: &Corpus, concepts: &[Concept]) -> String {
    let by_id: BTreeMap<&str, &Concept> = concepts.iter().map(|c| (c.id.as_str(), c)).collect();
    let mut blocks = Vec::new();
    for doc in &corpus.docs {
        let mut lines = vec![
            format!("{}|t|{}", doc.pmid, doc.title),
            format!("{}|a|{}", doc.pmid, doc.body),
        ];
        for m in &doc.mentions {
            let c = by_id[m.concept_id.as_str()];
            lines.push(format!(
                "{}\t{}\t{}\t{}\t{}\t{}",
                doc.pmid, m.start, m.end, m.surface, c.raw_type, c.raw_id
            ));
        }
        blocks.push(lines.join("\n"));
    }
    blocks.join("\n\n") + "\n"
}

/// Edge key → pmids, by nested loops over mention pairs.
pub fn brute_force_edges(corpus: &Corpus) -> BTreeMap<(String, String), BTreeSet<String>> {
    let mut edges: BTreeMap<(String, String), BTreeSet<String>> = BTreeMap::new();
    for doc in &corpus.docs {
        for a in &doc.mentions {
            for b in &doc.mentions {
                if a.category != ConceptCategory::Disease || a.concept_id == b.concept_id {
                    continue;
                }
                let key = if b.category == ConceptCategory::Disease {
                    let mut pair = [a.concept_id.clone(), b.concept_id.clone()];
                    pair.sort();
                    (pair[0].clone(), pair[1].clone())
                } else {
                    (a.concept_id.clone(), b.concept_id.clone())
                };
                edges.entry(key).or_default().insert(doc.pmid.clone());
            }
        }
    }
    edges
}

pub fn graph_edges(graph: &KnowledgeGraph) -> BTreeMap<(String, String), BTreeSet<String>> {
    graph
        .edges
        .values()
        .map(|e| {
            assert_eq!(e.weight as usize, e.pmids.len());
            ((e.disease_id.clone(), e.other_id.clone()), e.pmids.clone())
        })
        .collect()
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Mean silhouette over all points with Euclidean distance.
pub fn silhouette(points: &[[f64; 2]], labels: &[usize]) -> f64 {
    let d = |a: [f64; 2], b: [f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
    let n = points.len();
    let clusters: BTreeSet<usize> = labels.iter().copied().collect();
    let mut total = 0.0;
    for i in 0..n {
        let mut mean_to = BTreeMap::new();
        for &c in &clusters {
            let members: Vec<usize> = (0..n).filter(|&j| labels[j] == c && j != i).collect();
            if !members.is_empty() {
                let m = members.iter().map(|&j| d(points[i], points[j])).sum::<f64>() / members.len() as f64;
                mean_to.insert(c, m);
            }
        }
        let a = mean_to[&labels[i]];
        let b = mean_to
            .iter()
            .filter(|(&c, _)| c != labels[i])
            .map(|(_, &m)| m)
            .fold(f64::INFINITY, f64::min);
        total += (b - a) / a.max(b);
    }
    total / n as f64
}

/// Two-clique barbell as a corpus: one abstract per clique, plus one
/// abstract linking the two bridge diseases.
pub fn barbell_corpus(clique: usize) -> Corpus {
    let mention = |pmid: &str, k: usize, start: usize| EntityMention {
        pmid: pmid.into(),
        start,
        end: start + 3,
        surface: format!("d{k:02}"),
        category: ConceptCategory::Disease,
        concept_id: format!("Disease:D{k:02}"),
    };
    let doc = |pmid: &str, ks: Vec<usize>| {
        let title = "T".to_string();
        let body: String = ks.iter().map(|k| format!("d{k:02} ")).collect();
        let mentions = ks.iter().enumerate().map(|(i, &k)| mention(pmid, k, 2 + 4 * i)).collect();
        AbstractDoc {
            pmid: pmid.into(),
            title,
            body,
            mentions,
        }
    };
    Corpus::from_docs(vec![
        doc("1", (0..clique).collect()),
        doc("2", (clique..2 * clique).collect()),
        doc("3", vec![clique - 1, clique]),
    ])
}

/// Mean intra- and inter-clique cosine similarity for a barbell embedding.
pub fn clique_similarity(emb: &litkg::EmbeddingMatrix, clique: usize) -> (f64, f64) {
    let vec_of = |k: usize| emb.get(&format!("Disease:D{k:02}")).unwrap();
    let (mut intra, mut ni, mut inter, mut nx) = (0.0, 0, 0.0, 0);
    for a in 0..2 * clique {
        for b in (a + 1)..2 * clique {
            let s = cosine(vec_of(a), vec_of(b));
            if (a < clique) == (b < clique) {
                intra += s;
                ni += 1;
            } else {
                inter += s;
                nx += 1;
            }
        }
    }
    (intra / ni as f64, inter / nx as f64)
}

/// Runs the binary's `run` in-process and panics with context on failure.
pub fn run_cli(args: &[&str]) -> i32 {
    let mut argv = vec!["litkg"];
    argv.extend_from_slice(args);
    litkg::cli::run(argv)
}

/// Fixed weighted 6-node graph used for walk distribution checks.
pub const SIX_NODE_EDGES: [(usize, usize, f64); 8] = [
    (0, 1, 1.0),
    (0, 2, 2.0),
    (1, 2, 1.0),
    (1, 3, 3.0),
    (2, 4, 1.0),
    (3, 4, 2.0),
    (3, 5, 1.0),
    (4, 5, 4.0),
];

pub fn six_node_graph() -> litkg::walk::WalkGraph {
    let ids = (0..6).map(|i| format!("n{i}")).collect();
    litkg::walk::WalkGraph::from_edges(ids, &SIX_NODE_EDGES)
}

fn edge_weight(edges: &[(usize, usize, f64)], a: usize, b: usize) -> Option<f64> {
    edges
        .iter()
        .find(|&&(x, y, _)| (x == a && y == b) || (x == b && y == a))
        .map(|e| e.2)
}

/// node2vec transition probabilities from `cur` having arrived from `prev`,
/// computed straight from the edge list.
pub fn analytic_next(edges: &[(usize, usize, f64)], n: usize, prev: Option<usize>, cur: usize, p: f64, q: f64) -> Vec<f64> {
    let mut probs = vec![0.0; n];
    for x in 0..n {
        let Some(w) = edge_weight(edges, cur, x) else { continue };
        let bias = match prev {
            None => 1.0,
            Some(t) if t == x => 1.0 / p,
            Some(t) if edge_weight(edges, t, x).is_some() => 1.0,
            Some(_) => 1.0 / q,
        };
        probs[x] = w * bias;
    }
    let total: f64 = probs.iter().sum();
    probs.iter().map(|v| v / total).collect()
}

/// Largest gap between empirical and analytic second-order transitions
/// pooled over all walks.
pub fn walk_transition_error(corpus: &litkg::WalkCorpus, p: f64, q: f64) -> (f64, usize) {
    let n = 6;
    let mut counts: BTreeMap<(usize, usize), Vec<u64>> = BTreeMap::new();
    let mut steps = 0;
    for walk in &corpus.walks {
        for w in walk.windows(3) {
            let (t, v, x) = (w[0] as usize, w[1] as usize, w[2] as usize);
            counts.entry((t, v)).or_insert_with(|| vec![0; n])[x] += 1;
            steps += 1;
        }
    }
    let mut worst: f64 = 0.0;
    for ((t, v), row) in counts {
        let total: u64 = row.iter().sum();
        let expect = analytic_next(&SIX_NODE_EDGES, n, Some(t), v, p, q);
        for x in 0..n {
            worst = worst.max((row[x] as f64 / total as f64 - expect[x]).abs());
        }
    }
    (worst, steps)
}

/// Largest relative error between `pair_loss_grad` and central differences
/// of `pair_loss` on one random (d, k) configuration.
pub fn sgns_gradient_error<R: Rng>(rng: &mut R, d: usize, k: usize, h: f64) -> f64 {
    use litkg::sgns::{pair_loss, pair_loss_grad};
    let mut v = |_: usize| -> Vec<f64> { (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect() };
    let mut vectors: Vec<Vec<f64>> = (0..k + 2).map(&mut v).collect();
    let loss = |vs: &[Vec<f64>]| {
        let negs: Vec<&[f64]> = vs[2..].iter().map(|x| x.as_slice()).collect();
        pair_loss(&vs[0], &vs[1], &negs)
    };
    let grad = {
        let negs: Vec<&[f64]> = vectors[2..].iter().map(|x| x.as_slice()).collect();
        pair_loss_grad(&vectors[0], &vectors[1], &negs)
    };
    let analytic: Vec<&Vec<f64>> = std::iter::once(&grad.center)
        .chain(std::iter::once(&grad.context))
        .chain(grad.negatives.iter())
        .collect();
    let mut worst: f64 = 0.0;
    for which in 0..k + 2 {
        for i in 0..d {
            let orig = vectors[which][i];
            vectors[which][i] = orig + h;
            let up = loss(&vectors);
            vectors[which][i] = orig - h;
            let down = loss(&vectors);
            vectors[which][i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic[which][i];
            let scale = a.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max((a - numeric).abs() / scale);
        }
    }
    worst
}

/// Full pipeline (corpus → graph → walks → SGNS) on the barbell corpus.
pub fn barbell_embedding(seed: u64) -> litkg::EmbeddingMatrix {
    let graph = litkg::build_graph(&barbell_corpus(10));
    let walks = litkg::walk::walk_graph(&graph, &litkg::WalkParams { seed, ..Default::default() }).unwrap();
    litkg::sgns::train(&walks, &litkg::SgnsParams { seed, ..Default::default() }).unwrap()
}

/// `n` points in `d` dimensions, i.i.d. normal with spread `sigma` around `center`.
pub fn gaussian_points<R: Rng>(rng: &mut R, n: usize, d: usize, sigma: f64, center: &[f64]) -> Vec<Vec<f64>> {
    use rand_distr::{Distribution, Normal};
    let normal = Normal::new(0.0, sigma).unwrap();
    (0..n)
        .map(|_| (0..d).map(|k| center.get(k).copied().unwrap_or(0.0) + normal.sample(rng)).collect())
        .collect()
}

/// Largest single-step increase of the KL trace over `trace[from..]`.
pub fn max_kl_increase(trace: &[f64], from: usize) -> f64 {
    trace[from..].windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max)
}

/// Entropy in bits of a probability row, computed independently of the crate.
pub fn entropy_bits(row: &[f64]) -> f64 {
    -row.iter().filter(|&&p| p > 0.0).map(|&p| p * p.log2()).sum::<f64>()
}

/// Largest relative error between `kl_gradient` and central differences of
/// the KL objective on a random 8-point instance.
pub fn tsne_gradient_error<R: Rng>(rng: &mut R, h: f64) -> f64 {
    use litkg::tsne::{input_affinities, kl_divergence, kl_gradient, low_dim_affinities};
    let x = gaussian_points(rng, 8, 5, 1.0, &[]);
    let p = input_affinities(&x, 2.0).unwrap();
    let mut y: Vec<[f64; 2]> = (0..8).map(|_| [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)]).collect();
    let grad = kl_gradient(&p, &y);
    let mut worst: f64 = 0.0;
    for i in 0..8 {
        for a in 0..2 {
            let orig = y[i][a];
            y[i][a] = orig + h;
            let up = kl_divergence(&p, &low_dim_affinities(&y));
            y[i][a] = orig - h;
            let down = kl_divergence(&p, &low_dim_affinities(&y));
            y[i][a] = orig;
            let numeric = (up - down) / (2.0 * h);
            let scale = grad[i][a].abs().max(numeric.abs()).max(1e-8);
            worst = worst.max((grad[i][a] - numeric).abs() / scale);
        }
    }
    worst
}

/// Perplexity used for the 50-point convergence check; the default of 30
/// exceeds the (n - 1) / 3 bound at n = 50.
pub const CONVERGENCE_PERPLEXITY: f64 = 15.0;
/// Trailing window (in steps) over which the KL trace must not rise.
pub const TRAILING_WINDOW: usize = 100;

pub fn convergence_layout(seed: u64) -> litkg::ScatterLayout {
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
    let x = gaussian_points(&mut rng, 50, 50, 1.0, &[]);
    let params = litkg::TsneParams { perplexity: CONVERGENCE_PERPLEXITY, seed, ..Default::default() };
    litkg::tsne::run_tsne_points(&x, &params).unwrap()
}

/// Two 10-point blobs in 50-D whose centroids sit 10 sigma apart; returns
/// the silhouette of the 2-D layout under the true labels.
pub fn blob_silhouette(seed: u64) -> f64 {
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
    let mut x = gaussian_points(&mut rng, 10, 50, 1.0, &[5.0]);
    x.extend(gaussian_points(&mut rng, 10, 50, 1.0, &[-5.0]));
    let labels: Vec<usize> = (0..20).map(|i| i / 10).collect();
    let params = litkg::TsneParams { perplexity: 5.0, seed, ..Default::default() };
    let layout = litkg::tsne::run_tsne_points(&x, &params).unwrap();
    silhouette(&layout.coords, &labels)
}

/// Exhaustive top-k: repeated linear scans for the best remaining edge.
pub fn top_pairs_reference(graph: &KnowledgeGraph, relation: &str, k: usize) -> Vec<(String, String, u64)> {
    let category_of = |id: &str| id.split(':').next().unwrap().to_string();
    let wanted = |other: &str| match relation {
        "disease-chemical" => other == "Chemical",
        "disease-gene" => other == "Gene",
        "disease-species" => other == "Species",
        "disease-mutation" => other == "Mutation",
        "disease-disease" => other == "Disease",
        _ => unreachable!(),
    };
    let mut pool: Vec<(String, String, String, String, u64)> = graph
        .edges
        .values()
        .filter(|e| wanted(&category_of(&e.other_id)))
        .map(|e| {
            (
                graph.nodes[&e.disease_id].name.clone(),
                graph.nodes[&e.other_id].name.clone(),
                e.disease_id.clone(),
                e.other_id.clone(),
                e.weight,
            )
        })
        .collect();
    let mut out = Vec::new();
    while out.len() < k && !pool.is_empty() {
        let mut best = 0;
        for i in 1..pool.len() {
            let (a, b) = (&pool[i], &pool[best]);
            let better = a.4 > b.4 || (a.4 == b.4 && (&a.0, &a.1, &a.2, &a.3) < (&b.0, &b.1, &b.2, &b.3));
            if better {
                best = i;
            }
        }
        let e = pool.swap_remove(best);
        out.push((e.2, e.3, e.4));
    }
    out
}

/// Exhaustive k-NN with ties broken by id.
pub fn nearest_reference(ids: &[String], rows: &[Vec<f64>], query: usize, k: usize, cosine_metric: bool) -> Vec<(String, f64)> {
    let dist = |a: &[f64], b: &[f64]| {
        if cosine_metric {
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
            if na == 0.0 || nb == 0.0 { 1.0 } else { 1.0 - dot / (na * nb) }
        } else {
            a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
        }
    };
    let mut pool: Vec<(String, f64)> = (0..ids.len())
        .filter(|&r| r != query)
        .map(|r| (ids[r].clone(), dist(&rows[query], &rows[r])))
        .collect();
    let mut out = Vec::new();
    while out.len() < k && !pool.is_empty() {
        let mut best = 0;
        for i in 1..pool.len() {
            if pool[i].1 < pool[best].1 || (pool[i].1 == pool[best].1 && pool[i].0 < pool[best].0) {
                best = i;
            }
        }
        out.push(pool.swap_remove(best));
    }
    out
}

/// One random k-NN instance; integer coordinates on odd seeds to force ties.
pub fn random_embedding<R: Rng>(rng: &mut R, n: usize, d: usize, integer: bool) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut ids: Vec<String> = (0..n).map(|i| format!("Chemical:C{i:04}")).collect();
    ids.shuffle(rng);
    let rows = (0..n)
        .map(|_| {
            (0..d)
                .map(|_| if integer { rng.gen_range(-2..=2) as f64 } else { rng.gen_range(-1.0..1.0) })
                .collect()
        })
        .collect();
    (ids, rows)
}

/// Runs both query oracles on instance `seed`; returns a description of the
/// first mismatch.
pub fn query_oracle_instance(seed: u64) -> Result<(), String> {
    use litkg::query::{nearest_neighbors, top_pairs, ConceptCatalog, Metric};
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);

    let concepts = rng.gen_range(5..50);
    let pool = concept_pool(&mut rng, concepts);
    let docs = rng.gen_range(1..500);
    let corpus = random_corpus(&mut rng, docs, &pool, 6);
    let graph = litkg::build_graph(&corpus);
    for rel in litkg::RelationClass::ALL {
        let k = rng.gen_range(1..20);
        let got: Vec<(String, String, u64)> = top_pairs(&graph, rel, k)
            .unwrap()
            .into_iter()
            .map(|r| (r.disease_id, r.other_id, r.weight))
            .collect();
        let want = top_pairs_reference(&graph, rel.as_str(), k);
        if got != want {
            return Err(format!("top_pairs {rel} k={k}: {got:?} != {want:?}"));
        }
    }

    let n = rng.gen_range(2..=500);
    let d = rng.gen_range(1..12);
    let (ids, rows) = random_embedding(&mut rng, n, d, seed % 2 == 1);
    let emb = litkg::EmbeddingMatrix::from_rows(ids.clone(), rows.clone()).unwrap();
    let catalog = ConceptCatalog::default();
    for (metric, cos) in [(Metric::Euclidean, false), (Metric::Cosine, true)] {
        let q = rng.gen_range(0..n);
        let k = rng.gen_range(1..=n);
        let got: Vec<(String, f64)> = nearest_neighbors(&emb, &catalog, &ids[q], k, metric)
            .unwrap()
            .neighbors
            .into_iter()
            .map(|nb| (nb.concept_id, nb.distance))
            .collect();
        let want = nearest_reference(&ids, &rows, q, k, cos);
        if got != want {
            return Err(format!("nearest_neighbors {metric} n={n} k={k}"));
        }
    }
    Ok(())
}

type NodeAttrs = BTreeMap<String, (String, String, u64)>;
type EdgeAttrs = BTreeMap<(String, String), (u64, String, BTreeSet<String>)>;

pub fn attributed(graph: &KnowledgeGraph) -> (NodeAttrs, EdgeAttrs) {
    let nodes = graph
        .nodes
        .values()
        .map(|n| (n.concept_id.clone(), (n.name.clone(), n.category.label().to_string(), n.doc_frequency)))
        .collect();
    let edges = graph
        .edges
        .values()
        .map(|e| {
            (
                (e.disease_id.clone(), e.other_id.clone()),
                (e.weight, graph.relation_class(e).as_str().to_string(), e.pmids.clone()),
            )
        })
        .collect();
    (nodes, edges)
}

fn split_pmids(s: &str) -> BTreeSet<String> {
    s.split('|').filter(|p| !p.is_empty()).map(str::to_string).collect()
}

/// Reads GraphML with an independent XML parser.
pub fn graphml_read(text: &str) -> Result<(NodeAttrs, EdgeAttrs), String> {
    let doc = roxmltree::Document::parse(text).map_err(|e| e.to_string())?;
    let data = |n: roxmltree::Node, key: &str| -> String {
        n.children()
            .find(|c| c.has_tag_name("data") && c.attribute("key") == Some(key))
            .and_then(|c| c.text())
            .unwrap_or_default()
            .to_string()
    };
    let mut nodes = NodeAttrs::new();
    let mut edges = EdgeAttrs::new();
    for n in doc.descendants() {
        if n.has_tag_name("node") {
            let df = data(n, "doc_frequency").parse().map_err(|_| "bad doc_frequency")?;
            nodes.insert(n.attribute("id").unwrap().to_string(), (data(n, "name"), data(n, "category"), df));
        } else if n.has_tag_name("edge") {
            let key = (n.attribute("source").unwrap().to_string(), n.attribute("target").unwrap().to_string());
            let w = data(n, "weight").parse().map_err(|_| "bad weight")?;
            edges.insert(key, (w, data(n, "relation_class"), split_pmids(&data(n, "pmids"))));
        }
    }
    Ok((nodes, edges))
}

/// Reads the edge CSV (skipping `#` comment lines) with the csv crate.
pub fn edges_csv_read(text: &str) -> Result<Vec<(String, String, String, u64, BTreeSet<String>)>, String> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers().map_err(|e| e.to_string())?.iter().map(str::to_string).collect();
    if header != ["disease_id", "other_id", "relation", "weight", "pmids"] {
        return Err(format!("unexpected header {header:?}"));
    }
    reader
        .records()
        .map(|r| {
            let r = r.map_err(|e| e.to_string())?;
            Ok((
                r[0].to_string(),
                r[1].to_string(),
                r[2].to_string(),
                r[3].parse().map_err(|_| "bad weight")?,
                split_pmids(&r[4]),
            ))
        })
        .collect()
}

/// Tokenizes a Cypher script: every statement must be MERGE-based, end in
/// `;`, and hold only well-formed string literals. Returns the decoded
/// string literals of each statement.
pub fn cypher_statements(script: &str) -> Result<Vec<(String, Vec<String>)>, String> {
    let mut out = Vec::new();
    let mut open = false;
    for line in script.lines() {
        match line {
            l if l.starts_with("//") || l.is_empty() => continue,
            ":begin" if !open => open = true,
            ":commit" if open => open = false,
            l if l.starts_with(':') => return Err(format!("unbalanced {l}")),
            l => {
                if !open {
                    return Err("statement outside a transaction".into());
                }
                let (bare, literals) = strip_literals(l)?;
                if !bare.trim_end().ends_with(';') {
                    return Err(format!("unterminated statement {l}"));
                }
                let upper = bare.to_uppercase();
                if !upper.contains("MERGE") {
                    return Err(format!("no MERGE in {l}"));
                }
                for kw in ["CREATE", "DELETE", "REMOVE", "DROP"] {
                    if upper.split(|c: char| !c.is_alphanumeric() && c != '_').any(|w| w == kw) {
                        return Err(format!("{kw} in {l}"));
                    }
                }
                out.push((bare, literals));
            }
        }
    }
    if open {
        return Err("unclosed transaction".into());
    }
    Ok(out)
}

fn strip_literals(line: &str) -> Result<(String, Vec<String>), String> {
    let mut bare = String::new();
    let mut literals = Vec::new();
    let mut chars = line.chars();
    while let Some(c) = chars.next() {
        if c != '\'' {
            bare.push(c);
            continue;
        }
        let mut lit = String::new();
        loop {
            match chars.next() {
                None => return Err(format!("unterminated string in {line}")),
                Some('\'') => break,
                Some('\\') => match chars.next() {
                    Some('\\') => lit.push('\\'),
                    Some('\'') => lit.push('\''),
                    Some('"') => lit.push('"'),
                    Some('n') => lit.push('\n'),
                    Some('r') => lit.push('\r'),
                    Some('t') => lit.push('\t'),
                    other => return Err(format!("bad escape {other:?}")),
                },
                Some(ch) => lit.push(ch),
            }
        }
        bare.push_str("''");
        literals.push(lit);
    }
    Ok((bare, literals))
}

/// Checks one graph through every round trip; returns the first failure.
pub fn export_round_trips(graph: &KnowledgeGraph, batch: usize) -> Result<(), String> {
    let (nodes, edges) = attributed(graph);
    let gm = graphml_read(&litkg::export::to_graphml(graph, Some("x -- y")))?;
    if gm != (nodes.clone(), edges.clone()) {
        return Err("GraphML round trip differs".into());
    }
    let json = KnowledgeGraph::from_json(&graph.to_json(None)).map_err(|e| e.to_string())?;
    if &json != graph {
        return Err("graph JSON round trip differs".into());
    }
    let rows = edges_csv_read(&litkg::export::export_edges_csv(graph))?;
    let back: EdgeAttrs = rows.into_iter().map(|(a, b, r, w, p)| ((a, b), (w, r, p))).collect();
    if back != edges {
        return Err("edge CSV round trip differs".into());
    }
    let script = litkg::export::to_cypher(graph, batch, Some("provenance"));
    let statements = cypher_statements(&script)?;
    if statements.len() != graph.node_count() + graph.edge_count() {
        return Err("statement count".into());
    }
    let merged_ids: BTreeSet<&String> = statements
        .iter()
        .filter(|(bare, _)| bare.starts_with("MERGE (n:Concept"))
        .map(|(_, lits)| &lits[0])
        .collect();
    if merged_ids != nodes.keys().collect() {
        return Err("Cypher node ids differ".into());
    }
    let batches = script.lines().filter(|l| *l == ":begin").count();
    if batches != statements.len().div_ceil(batch) {
        return Err("batch count".into());
    }
    Ok(())
}

pub fn litkg_command() -> std::process::Command {
    std::process::Command::new(env!("CARGO_BIN_EXE_litkg"))
}

/// Output files written by [`run_pipeline`], relative to its directory.
pub const PIPELINE_OUTPUTS: [&str; 15] = [
    "manifest.json",
    "abstracts.txt",
    "corpus.jsonl",
    "graph.json",
    "embeddings.tsv",
    "walks.txt",
    "layout.csv",
    "kl.csv",
    "stats.json",
    "top_pairs.txt",
    "nn.csv",
    "graph.graphml",
    "graph.cypher",
    "edges.csv",
    "scatter.svg",
];

/// Runs every stage over the bundled fixture into `dir` with one thread and
/// seed 7. Returns the failing stage, if any.
pub fn run_pipeline(dir: &Path) -> Result<(), String> {
    let fixtures = fixture_dir();
    let lexicon = fixtures.join("diet_lexicon.txt");
    let f = |name: &str| dir.join(name).to_string_lossy().into_owned();
    let stages: Vec<Vec<String>> = vec![
        vec!["fetch".into(), "--fixtures".into(), fixtures.to_string_lossy().into(), "--manifest".into(), f("manifest.json"), "--out".into(), f("abstracts.txt")],
        vec!["ingest".into(), "--input".into(), f("abstracts.txt"), "--out".into(), f("corpus.jsonl")],
        vec!["build".into(), "--corpus".into(), f("corpus.jsonl"), "--out".into(), f("graph.json")],
        vec!["embed".into(), "--graph".into(), f("graph.json"), "--seed".into(), "7".into(), "--out".into(), f("embeddings.tsv"), "--walks-out".into(), f("walks.txt")],
        vec!["tsne".into(), "--embeddings".into(), f("embeddings.tsv"), "--graph".into(), f("graph.json"), "--perplexity".into(), "10".into(), "--seed".into(), "7".into(), "--out".into(), f("layout.csv"), "--kl-out".into(), f("kl.csv")],
        vec!["stats".into(), "--graph".into(), f("graph.json"), "--corpus".into(), f("corpus.jsonl"), "--format".into(), "json".into(), "--out".into(), f("stats.json")],
        vec!["top-pairs".into(), "--graph".into(), f("graph.json"), "--relation".into(), "disease-chemical".into(), "--k".into(), "6".into(), "--out".into(), f("top_pairs.txt")],
        vec!["nn".into(), "--embeddings".into(), f("embeddings.tsv"), "--graph".into(), f("graph.json"), "--query".into(), "Alzheimer's disease".into(), "--k".into(), "5".into(), "--lexicon".into(), lexicon.to_string_lossy().into(), "--format".into(), "csv".into(), "--out".into(), f("nn.csv")],
        vec!["export".into(), "--graph".into(), f("graph.json"), "--graphml".into(), f("graph.graphml"), "--cypher".into(), f("graph.cypher"), "--edges-csv".into(), f("edges.csv"), "--svg".into(), f("scatter.svg"), "--layout".into(), f("layout.csv")],
    ];
    for args in stages {
        let out = litkg_command().args(["--threads", "1"]).args(&args).output().map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!("{} exited {:?}: {}", args[0], out.status.code(), String::from_utf8_lossy(&out.stderr)));
        }
    }
    Ok(())
}

/// Parses every pipeline output with the matching reader.
pub fn check_pipeline_outputs(dir: &Path) -> Result<(), String> {
    let read = |name: &str| std::fs::read_to_string(dir.join(name)).map_err(|e| format!("{name}: {e}"));
    litkg::fetch::manifest_from_json(&read("manifest.json")?).map_err(|e| e.to_string())?;
    if litkg::parse_pubtator(&read("abstracts.txt")?).docs.len() != 50 {
        return Err("abstracts.txt".into());
    }
    Corpus::from_jsonl(&read("corpus.jsonl")?).map_err(|e| e.to_string())?;
    let graph = KnowledgeGraph::from_json(&read("graph.json")?).map_err(|e| e.to_string())?;
    let emb = litkg::formats::embedding_from_tsv(&read("embeddings.tsv")?).map_err(|e| e.to_string())?;
    if emb.dims != 100 || emb.len() != graph.node_count() {
        return Err("embeddings shape".into());
    }
    litkg::WalkCorpus::from_text(&read("walks.txt")?);
    let layout = litkg::formats::layout_from_csv(&read("layout.csv")?).map_err(|e| e.to_string())?;
    if layout.ids.len() != graph.node_count() {
        return Err("layout size".into());
    }
    let kl = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(read("kl.csv")?.as_bytes()).records().count();
    if kl != 1001 {
        return Err("kl trace length".into());
    }
    serde_json::from_str::<serde_json::Value>(&read("stats.json")?).map_err(|e| e.to_string())?;
    // provenance, column names, rule, six rows
    if read("top_pairs.txt")?.lines().count() != 1 + 2 + 6 {
        return Err("top_pairs rows".into());
    }
    let nn = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(read("nn.csv")?.as_bytes()).records().count();
    if nn != 5 {
        return Err("nn rows".into());
    }
    let (nodes, edges) = graphml_read(&read("graph.graphml")?)?;
    if (nodes, edges) != attributed(&graph) {
        return Err("graphml differs from graph.json".into());
    }
    cypher_statements(&read("graph.cypher")?)?;
    edges_csv_read(&read("edges.csv")?)?;
    roxmltree::Document::parse(&read("scatter.svg")?).map_err(|e| e.to_string())?;
    Ok(())
}
