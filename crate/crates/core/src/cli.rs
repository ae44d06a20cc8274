//! `litkg` command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 network error.

use std::collections::HashSet;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::export;
use crate::fetch::{self, FetchConfig, Fetcher, SearchFilters, SearchQuery};
use crate::formats::{self, Provenance};
use crate::graph::{build_graph, KnowledgeGraph, RelationClass};
use crate::pubtator::{parse_pubtator, Corpus};
use crate::query::{self, ConceptCatalog, Metric};
use crate::sgns::{self, EmbeddingMatrix, SgnsParams};
use crate::tsne::{self, TsneParams};
use crate::walk::{self, WalkParams};

#[derive(Debug, Parser)]
#[command(name = "litkg", version, about = "Disease co-occurrence knowledge graphs from PubTator annotations")]
struct Cli {
    /// TOML key/value file supplying defaults for any flag (`dims = 100`).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Worker threads; 1 keeps every stage on its deterministic path.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    /// Increase log verbosity (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Search PubMed and download PubTator annotations.
    Fetch(FetchArgs),
    /// Parse PubTator text into the canonical corpus file.
    Ingest(IngestArgs),
    /// Build the co-occurrence graph from a corpus.
    Build(BuildArgs),
    /// Random walks plus skip-gram training.
    Embed(EmbedArgs),
    /// Project embeddings to 2-D.
    Tsne(TsneArgs),
    /// Concept and relation counts.
    Stats(StatsArgs),
    /// Most frequent disease pairs of one relation class.
    TopPairs(TopPairsArgs),
    /// Nearest neighbors of a concept in embedding space.
    Nn(NnArgs),
    /// Write GraphML, Cypher, edge CSV and/or SVG.
    Export(ExportArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OutputFormat {
    Text,
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct FetchArgs {
    /// Disease-side query term (repeatable); defaults to the built-in query.
    #[arg(long = "disease-term")]
    disease_terms: Vec<String>,
    /// Diet-side query term (repeatable).
    #[arg(long = "diet-term")]
    diet_terms: Vec<String>,
    #[arg(long, default_value_t = 10_000)]
    limit: usize,
    #[arg(long)]
    min_year: Option<u16>,
    #[arg(long)]
    max_year: Option<u16>,
    /// Publication type filter (repeatable), e.g. "Clinical Trial".
    #[arg(long = "pub-type")]
    pub_types: Vec<String>,
    /// Serve search results and annotations from a fixture directory.
    #[arg(long)]
    fixtures: Option<PathBuf>,
    #[arg(long, env = fetch::ENV_API_BASE)]
    api_base: Option<String>,
    #[arg(long, env = fetch::ENV_API_KEY, hide_env_values = true)]
    api_key: Option<String>,
    /// Request ceiling per second.
    #[arg(long, default_value_t = 3.0)]
    rate: f64,
    #[arg(long, default_value_t = 3)]
    retries: u32,
    /// Manifest output (JSON).
    #[arg(long)]
    manifest: PathBuf,
    /// PubTator output; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct IngestArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BuildArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EmbedArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    dims: usize,
    #[arg(long, default_value_t = 10)]
    walk_length: usize,
    #[arg(long, default_value_t = 10)]
    walks_per_node: usize,
    /// Return parameter.
    #[arg(long, default_value_t = 1.0)]
    p: f64,
    /// In-out parameter.
    #[arg(long, default_value_t = 1.0)]
    q: f64,
    #[arg(long, default_value_t = 5)]
    window: usize,
    #[arg(long, default_value_t = 5)]
    negatives: usize,
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    #[arg(long, default_value_t = 0.025)]
    lr: f64,
    #[arg(long, default_value_t = 0.75)]
    unigram_power: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Precompute all second-order transition tables.
    #[arg(long)]
    eager: bool,
    /// Also dump the walk corpus (one walk per line).
    #[arg(long)]
    walks_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TsneArgs {
    #[arg(long)]
    embeddings: PathBuf,
    /// Graph supplying names and categories for the layout file.
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 30.0)]
    perplexity: f64,
    #[arg(long, default_value_t = 1000)]
    iterations: usize,
    #[arg(long, default_value_t = 200.0)]
    learning_rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// KL trace output (`iter,kl`).
    #[arg(long)]
    kl_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct StatsArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
    format: OutputFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TopPairsArgs {
    #[arg(long)]
    graph: PathBuf,
    /// disease-chemical, disease-gene, disease-species, disease-mutation or disease-disease.
    #[arg(long)]
    relation: String,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
    format: OutputFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct NnArgs {
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Query the 2-D layout instead of the embedding space.
    #[arg(long)]
    layout: Option<PathBuf>,
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Concept id or display name.
    #[arg(long)]
    query: String,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value = "euclidean")]
    metric: String,
    /// Concept ids to flag as diet-related, one per line.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
    format: OutputFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExportArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    graphml: Option<PathBuf>,
    #[arg(long)]
    cypher: Option<PathBuf>,
    #[arg(long, default_value_t = export::DEFAULT_CYPHER_BATCH)]
    batch_size: usize,
    #[arg(long)]
    edges_csv: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Layout CSV for the SVG scatter.
    #[arg(long)]
    layout: Option<PathBuf>,
}

/// Runs the tool and returns the process exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let argv = match apply_config(argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .try_init();

    if cli.threads == 0 {
        eprintln!("error: --threads must be >= 1");
        return 1;
    }
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return 1;
        }
    };
    match pool.install(|| dispatch(&cli)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Appends flags from a `--config` TOML file for every key the chosen
/// subcommand accepts and the command line does not already set.
fn apply_config(argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let strs: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let mut config_path = None;
    for (i, a) in strs.iter().enumerate() {
        if a == "--config" {
            config_path = strs.get(i + 1).cloned();
        } else if let Some(p) = a.strip_prefix("--config=") {
            config_path = Some(p.to_string());
        }
    }
    let Some(config_path) = config_path else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&config_path).map_err(|e| Error::io(&config_path, e))?;
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::parse(config_path.clone(), e.to_string()))?;

    let command = Cli::command();
    let sub_name = strs
        .iter()
        .skip(1)
        .find(|a| command.find_subcommand(a.as_str()).is_some())
        .cloned();
    let Some(sub_name) = sub_name else {
        return Ok(argv);
    };
    let sub = command.find_subcommand(&sub_name).expect("found above");
    let known: HashSet<String> = sub
        .get_arguments()
        .chain(command.get_arguments())
        .filter_map(|a| a.get_long().map(str::to_string))
        .collect();
    let present = |flag: &str| {
        strs.iter()
            .any(|a| a == &format!("--{flag}") || a.starts_with(&format!("--{flag}=")))
    };

    let mut entries: Vec<(String, toml::Value)> = Vec::new();
    for (key, value) in &table {
        match value {
            // `[embed]` style sections apply only to that subcommand.
            toml::Value::Table(section) if key == &sub_name => {
                entries.extend(section.iter().map(|(k, v)| (k.clone(), v.clone())));
            }
            toml::Value::Table(_) => {}
            v => entries.push((key.clone(), v.clone())),
        }
    }
    let mut out = argv;
    for (key, value) in entries {
        let flag = key.replace('_', "-");
        if !known.contains(&flag) || present(&flag) {
            continue;
        }
        let values = match value {
            toml::Value::Array(items) => items,
            v => vec![v],
        };
        for v in values {
            match v {
                toml::Value::Boolean(true) => out.push(format!("--{flag}").into()),
                toml::Value::Boolean(false) => {}
                toml::Value::String(s) => {
                    out.push(format!("--{flag}").into());
                    out.push(s.into());
                }
                other => {
                    out.push(format!("--{flag}").into());
                    out.push(other.to_string().into());
                }
            }
        }
    }
    Ok(out)
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Fetch(a) => cmd_fetch(a),
        Command::Ingest(a) => cmd_ingest(a),
        Command::Build(a) => cmd_build(a),
        Command::Embed(a) => cmd_embed(a, cli.threads),
        Command::Tsne(a) => cmd_tsne(a),
        Command::Stats(a) => cmd_stats(a),
        Command::TopPairs(a) => cmd_top_pairs(a),
        Command::Nn(a) => cmd_nn(a),
        Command::Export(a) => cmd_export(a),
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn emit(path: Option<&Path>, content: &str) -> Result<()> {
    match path {
        Some(p) if p != Path::new("-") => std::fs::write(p, content).map_err(|e| Error::io(p, e)),
        _ => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(content.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn load_graph(path: &Path) -> Result<KnowledgeGraph> {
    KnowledgeGraph::from_json(&read_text(path)?)
}

fn load_corpus(path: &Path) -> Result<Corpus> {
    Corpus::from_jsonl(&read_text(path)?)
}

fn cmd_fetch(a: &FetchArgs) -> Result<()> {
    let query = if a.disease_terms.is_empty() && a.diet_terms.is_empty() {
        fetch::default_query()
    } else {
        SearchQuery::new(a.disease_terms.clone(), a.diet_terms.clone())?
    };
    let years = match (a.min_year, a.max_year) {
        (None, None) => None,
        (lo, hi) => Some((lo.unwrap_or(1800), hi.unwrap_or(3000))),
    };
    let filters = SearchFilters {
        years,
        publication_types: a.pub_types.clone(),
    };
    let mut config = FetchConfig {
        requests_per_second: a.rate,
        max_retries: a.retries,
        initial_backoff: Duration::from_millis(500),
        ..FetchConfig::default()
    };
    if let Some(base) = &a.api_base {
        let base = base.trim_end_matches('/').to_string();
        config.search_base = base.clone();
        config.annotation_base = base;
    }
    config.api_key = a.api_key.clone().filter(|k| !k.is_empty());

    let mut fetcher = Fetcher::live(config)?;
    if let Some(dir) = &a.fixtures {
        fetcher = fetcher.with_fixtures(dir);
    }
    let manifest = fetcher.search_pmids(&query, &filters, a.limit)?;
    log::info!("search returned {} PMIDs", manifest.pmids.len());
    let batch = if manifest.pmids.is_empty() {
        fetch::AnnotationBatch {
            text: String::new(),
            skipped: Vec::new(),
        }
    } else {
        fetcher.fetch_annotations(&manifest)?
    };

    let prov = Provenance::new("fetch")
        .param("term", &manifest.term)
        .param("limit", a.limit)
        .param("source", format!("{:?}", manifest.source).to_lowercase());
    // Extra keys are ignored by `manifest_from_json`, so the file stays loadable.
    let mut record = serde_json::to_value(&manifest).expect("manifest serializes");
    record["_provenance"] = prov.to_json();
    record["skipped"] = serde_json::json!(batch.skipped);
    let mut json = serde_json::to_string_pretty(&record).expect("manifest serializes");
    json.push('\n');
    emit(Some(&a.manifest), &json)?;
    emit(a.out.as_deref(), &batch.text)
}

fn cmd_ingest(a: &IngestArgs) -> Result<()> {
    let text = read_text(&a.input)?;
    let corpus = parse_pubtator(&text);
    for err in &corpus.block_errors {
        log::warn!("{}:{}: {}", a.input.display(), err.line, err.message);
    }
    for err in &corpus.mention_errors {
        log::warn!("{}:{}: {}", a.input.display(), err.line, err.message);
    }
    log::info!(
        "{} abstracts, {} mentions, {} dropped (no id), {} ignored, {} offset warnings",
        corpus.docs.len(),
        corpus.mention_count(),
        corpus.dropped_mentions,
        corpus.ignored_type_counts.values().sum::<usize>(),
        corpus.offset_warnings
    );
    let prov = Provenance::new("ingest").input_file(&a.input)?;
    let header = serde_json::json!({ "_provenance": prov.to_json() });
    let mut out = serde_json::to_string(&header).expect("json");
    out.push('\n');
    out.push_str(&corpus.to_jsonl());
    emit(a.out.as_deref(), &out)
}

fn cmd_build(a: &BuildArgs) -> Result<()> {
    let corpus = load_corpus(&a.corpus)?;
    let graph = build_graph(&corpus);
    log::info!("{} nodes, {} edges", graph.node_count(), graph.edge_count());
    let prov = Provenance::new("build").input_file(&a.corpus)?;
    emit(a.out.as_deref(), &graph.to_json(Some(&prov.to_json())))
}

fn cmd_embed(a: &EmbedArgs, threads: usize) -> Result<()> {
    let graph = load_graph(&a.graph)?;
    if graph.is_empty() {
        return Err(Error::EmptyInput("graph has no nodes to embed".into()));
    }
    let walk_params = WalkParams {
        walk_length: a.walk_length,
        walks_per_node: a.walks_per_node,
        return_param: a.p,
        inout_param: a.q,
        seed: a.seed,
        eager: a.eager,
    };
    let sgns_params = SgnsParams {
        dims: a.dims,
        window: a.window,
        negatives: a.negatives,
        epochs: a.epochs,
        lr0: a.lr,
        seed: a.seed,
        unigram_power: a.unigram_power,
        threads,
    };
    walk_params.validate()?;
    sgns_params.validate()?;
    let walks = walk::walk_graph(&graph, &walk_params)?;
    log::info!("{} walks, {} tokens", walks.walks.len(), walks.token_count());

    let prov = Provenance::new("embed")
        .input_file(&a.graph)?
        .param("dims", a.dims)
        .param("walk_length", a.walk_length)
        .param("walks_per_node", a.walks_per_node)
        .param("p", a.p)
        .param("q", a.q)
        .param("window", a.window)
        .param("negatives", a.negatives)
        .param("epochs", a.epochs)
        .param("lr", a.lr)
        .param("unigram_power", a.unigram_power)
        .param("seed", a.seed)
        .param("threads", threads);
    if let Some(path) = &a.walks_out {
        let mut text = format!("# {}\n", prov.to_line());
        text.push_str(&walks.to_text());
        emit(Some(path), &text)?;
    }
    let emb = sgns::train(&walks, &sgns_params)?;
    emit(a.out.as_deref(), &formats::embedding_to_tsv(&emb, Some(&prov)))
}

fn cmd_tsne(a: &TsneArgs) -> Result<()> {
    let emb = formats::embedding_from_tsv(&read_text(&a.embeddings)?)?;
    let graph = match &a.graph {
        Some(p) => load_graph(p)?,
        None => KnowledgeGraph::empty(),
    };
    let params = TsneParams {
        perplexity: a.perplexity,
        max_iter: a.iterations,
        learning_rate: a.learning_rate,
        seed: a.seed,
        ..TsneParams::default()
    };
    let layout = tsne::run_tsne(&emb, &params)?;
    log::info!("final KL {:.6}", layout.final_kl);
    let mut prov = Provenance::new("tsne").input_file(&a.embeddings)?;
    if let Some(p) = &a.graph {
        prov = prov.input_file(p)?;
    }
    let prov = prov
        .param("perplexity", a.perplexity)
        .param("iterations", a.iterations)
        .param("learning_rate", a.learning_rate)
        .param("seed", a.seed)
        .param("final_kl", formats::format_sig(layout.final_kl, 9));
    if let Some(p) = &a.kl_out {
        emit(Some(p), &formats::kl_trace_csv(&layout, Some(&prov)))?;
    }
    emit(a.out.as_deref(), &formats::layout_to_csv(&layout, &graph, Some(&prov)))
}

fn csv_string(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    for r in rows {
        w.write_record(r).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

/// Renders a query result. Text and CSV get a `#` provenance line; JSON
/// gets a `_provenance` member.
fn render(
    format: OutputFormat,
    prov: &Provenance,
    header: &[&str],
    rows: &[Vec<String>],
    json: serde_json::Value,
) -> String {
    match format {
        OutputFormat::Text => format!("# {}\n{}", prov.to_line(), query::render_table(header, rows)),
        OutputFormat::Csv => format!("# {}\n{}", prov.to_line(), csv_string(header, rows)),
        OutputFormat::Json => {
            let mut value = serde_json::json!({ "_provenance": prov.to_json() });
            if let (Some(obj), serde_json::Value::Object(payload)) = (value.as_object_mut(), json) {
                obj.extend(payload);
            }
            let mut j = serde_json::to_string_pretty(&value).expect("json");
            j.push('\n');
            j
        }
    }
}

fn cmd_stats(a: &StatsArgs) -> Result<()> {
    let graph = load_graph(&a.graph)?;
    let corpus = load_corpus(&a.corpus)?;
    let s = query::stats(&graph, &corpus)?;
    let mut rows: Vec<Vec<String>> = vec![vec!["abstracts".into(), s.abstracts.to_string()]];
    for (c, n) in &s.nodes_by_category {
        rows.push(vec![format!("concepts.{}", c.label()), n.to_string()]);
    }
    for (r, n) in &s.edges_by_relation {
        rows.push(vec![format!("relations.{r}"), n.to_string()]);
    }
    rows.push(vec!["abstracts_with_mutation_disease_pairs".into(), s.mutation_disease_abstracts.to_string()]);
    rows.push(vec!["total_nodes".into(), s.total_nodes.to_string()]);
    rows.push(vec!["total_edges".into(), s.total_edges.to_string()]);
    let prov = Provenance::new("stats").input_file(&a.graph)?.input_file(&a.corpus)?;
    let json = serde_json::to_value(&s).expect("stats serialize");
    emit(a.out.as_deref(), &render(a.format, &prov, &["statistic", "value"], &rows, json))
}

fn cmd_top_pairs(a: &TopPairsArgs) -> Result<()> {
    let relation: RelationClass = a.relation.parse()?;
    let graph = load_graph(&a.graph)?;
    let rows = query::top_pairs(&graph, relation, a.k)?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| vec![(i + 1).to_string(), r.disease_name.clone(), r.other_name.clone(), r.weight.to_string()])
        .collect();
    let prov = Provenance::new("top-pairs")
        .input_file(&a.graph)?
        .param("relation", relation)
        .param("k", a.k);
    let json = serde_json::json!({ "relation": relation, "pairs": rows });
    let header = ["rank", "disease", "other", "count"];
    emit(a.out.as_deref(), &render(a.format, &prov, &header, &table, json))
}

fn cmd_nn(a: &NnArgs) -> Result<()> {
    let metric: Metric = a.metric.parse()?;
    let mut prov = Provenance::new("nn");
    let (emb, space) = match (&a.embeddings, &a.layout) {
        (_, Some(layout)) => {
            prov = prov.input_file(layout)?;
            let l = formats::layout_from_csv(&read_text(layout)?)?;
            let rows = l.coords.iter().map(|c| c.to_vec()).collect();
            (EmbeddingMatrix::from_rows(l.ids, rows)?, "layout")
        }
        (Some(e), None) => {
            prov = prov.input_file(e)?;
            (formats::embedding_from_tsv(&read_text(e)?)?, "embedding")
        }
        (None, None) => {
            return Err(Error::InvalidParameter("nn needs --embeddings or --layout".into()));
        }
    };
    let catalog = match &a.graph {
        Some(p) => {
            prov = prov.input_file(p)?;
            ConceptCatalog::from_graph(&load_graph(p)?)
        }
        None => ConceptCatalog::default(),
    };
    let lexicon = match &a.lexicon {
        Some(p) => {
            prov = prov.input_file(p)?;
            query::load_lexicon(p)?
        }
        None => HashSet::new(),
    };
    let result = query::nearest_neighbors(&emb, &catalog, &a.query, a.k, metric)?;
    let flagged = query::neighbor_highlight(&result, &lexicon);
    let rows: Vec<Vec<String>> = flagged
        .iter()
        .enumerate()
        .map(|(i, h)| {
            vec![
                (i + 1).to_string(),
                h.neighbor.concept_id.clone(),
                h.neighbor.name.clone(),
                h.neighbor.category.map(|c| c.label().to_string()).unwrap_or_default(),
                format!("{:.6}", h.neighbor.distance),
                h.diet_related.to_string(),
            ]
        })
        .collect();
    let prov = prov
        .param("query", &result.query)
        .param("metric", metric)
        .param("space", space)
        .param("k", a.k);
    let json = serde_json::json!({
        "query": result.query,
        "metric": metric,
        "space": space,
        "neighbors": flagged,
    });
    let header = ["rank", "concept_id", "name", "category", "distance", "diet_flag"];
    emit(a.out.as_deref(), &render(a.format, &prov, &header, &rows, json))
}

fn cmd_export(a: &ExportArgs) -> Result<()> {
    if a.graphml.is_none() && a.cypher.is_none() && a.edges_csv.is_none() && a.svg.is_none() {
        return Err(Error::InvalidParameter(
            "export needs at least one of --graphml, --cypher, --edges-csv, --svg".into(),
        ));
    }
    let graph = load_graph(&a.graph)?;
    let prov = Provenance::new("export").input_file(&a.graph)?;
    if let Some(p) = &a.graphml {
        emit(Some(p), &export::to_graphml(&graph, Some(&prov.to_line())))?;
    }
    if let Some(p) = &a.cypher {
        let prov = prov.clone().param("batch_size", a.batch_size);
        emit(Some(p), &export::to_cypher(&graph, a.batch_size, Some(&prov.to_line())))?;
    }
    if let Some(p) = &a.edges_csv {
        emit(Some(p), &format!("# {}\n{}", prov.to_line(), export::export_edges_csv(&graph)))?;
    }
    if let Some(p) = &a.svg {
        let layout_path = a
            .layout
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("--svg needs --layout".into()))?;
        let layout = formats::layout_from_csv(&read_text(layout_path)?)?;
        let prov = prov.clone().input_file(layout_path)?;
        emit(Some(p), &export::to_scatter_svg(&layout, &graph, Some(&prov.to_line())))?;
    }
    Ok(())
}
