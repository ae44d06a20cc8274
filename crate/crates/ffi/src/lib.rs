//! C ABI over `litkg`.
//!
//! Objects cross the boundary as opaque handles created by a `litkg_*`
//! constructor and released with the matching `*_free`. Every fallible call
//! returns a [`LitkgStatus`]; on failure [`litkg_last_error`] describes the
//! problem for the calling thread. Strings handed out by the library are
//! owned by the caller and must be released with [`litkg_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use litkg::query::{ConceptCatalog, Metric};
use litkg::{Error, SgnsParams, TsneParams, WalkParams};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LitkgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidParameter = 3,
    Io = 4,
    Parse = 5,
    Network = 6,
    EmptyInput = 7,
    UnknownConcept = 8,
    NonFinite = 9,
    Conflict = 10,
    Panic = 11,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LitkgMetric {
    Euclidean = 0,
    Cosine = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LitkgExportFormat {
    GraphJson = 0,
    GraphMl = 1,
    Cypher = 2,
    EdgesCsv = 3,
}

/// Walk and skip-gram settings for [`litkg_embed`]. Start from
/// [`litkg_embed_params_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LitkgEmbedParams {
    pub dims: usize,
    pub walk_length: usize,
    pub walks_per_node: usize,
    pub return_param: f64,
    pub inout_param: f64,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub unigram_power: f64,
    pub seed: u64,
    pub threads: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LitkgTsneParams {
    pub perplexity: f64,
    pub max_iter: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

pub struct LitkgCorpus(litkg::Corpus);
pub struct LitkgGraph(litkg::KnowledgeGraph);
pub struct LitkgEmbedding {
    matrix: litkg::EmbeddingMatrix,
    ids: Vec<CString>,
}
pub struct LitkgLayout {
    layout: litkg::ScatterLayout,
    ids: Vec<CString>,
}
pub struct LitkgNeighbors {
    ids: Vec<CString>,
    names: Vec<CString>,
    distances: Vec<f64>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(LitkgStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::InvalidParameter(_) | Error::UnknownRelation(_) => LitkgStatus::InvalidParameter,
            Error::Io { .. } => LitkgStatus::Io,
            Error::Parse { .. } => LitkgStatus::Parse,
            Error::Network { .. } | Error::RateLimited { .. } => LitkgStatus::Network,
            Error::EmptyInput(_) => LitkgStatus::EmptyInput,
            Error::UnknownConcept { .. } => LitkgStatus::UnknownConcept,
            Error::NonFinite { .. } => LitkgStatus::NonFinite,
            Error::OverlappingPmids(_) | Error::ProvenanceMismatch { .. } => LitkgStatus::Conflict,
        };
        Failure(status, e.to_string())
    }
}

fn c_string(s: &str) -> CString {
    CString::new(s.replace('\0', "")).expect("nul bytes removed")
}

fn set_last_error(message: &str) {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c_string(message)));
}

/// Runs `f`, converting errors and panics into a status code.
fn guard<F>(f: F) -> LitkgStatus
where
    F: FnOnce() -> Result<(), Failure>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
            LitkgStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_last_error(&message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(&format!("internal error: {message}"));
            LitkgStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(LitkgStatus::NullPointer, format!("{what} is null"))
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(LitkgStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, s: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = c_string(s).into_raw();
    Ok(())
}

unsafe fn release<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Message for the most recent failed call on this thread, or null after a
/// successful one. Valid until the next `litkg_*` call on the same thread.
#[no_mangle]
pub extern "C" fn litkg_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// # Safety
/// `s` must be null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn litkg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// Corpus

/// Parses PubTator text. Damaged blocks are skipped, not reported as errors.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn litkg_corpus_parse_pubtator(text: *const c_char, out: *mut *mut LitkgCorpus) -> LitkgStatus {
    guard(|| put(out, LitkgCorpus(litkg::parse_pubtator(read_str(text, "text")?))))
}

/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn litkg_corpus_from_jsonl(text: *const c_char, out: *mut *mut LitkgCorpus) -> LitkgStatus {
    guard(|| put(out, LitkgCorpus(litkg::Corpus::from_jsonl(read_str(text, "text")?)?)))
}

/// # Safety
/// `corpus` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn litkg_corpus_to_jsonl(corpus: *const LitkgCorpus, out: *mut *mut c_char) -> LitkgStatus {
    guard(|| put_string(out, &borrow(corpus, "corpus")?.0.to_jsonl()))
}

/// # Safety
/// `corpus` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn litkg_corpus_to_pubtator(corpus: *const LitkgCorpus, out: *mut *mut c_char) -> LitkgStatus {
    guard(|| put_string(out, &borrow(corpus, "corpus")?.0.to_pubtator()))
}

/// Number of abstracts, or 0 for a null handle.
///
/// # Safety
/// `corpus` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn litkg_corpus_len(corpus: *const LitkgCorpus) -> usize {
    corpus.as_ref().map_or(0, |c| c.0.docs.len())
}

/// # Safety
/// `corpus` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn litkg_corpus_free(corpus: *mut LitkgCorpus) {
    release(corpus)
}

// Graph

/// # Safety
/// `corpus` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn litkg_graph_build(corpus: *const LitkgCorpus, out: *mut *mut LitkgGraph) -> LitkgStatus {
    guard(|| put(out, LitkgGraph(litkg::build_graph(&borrow(corpus, "corpus")?.0))))
}

/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn litkg_graph_from_json(text: *const c_char, out: *mut *mut LitkgGraph) -> LitkgStatus {
    guard(|| put(out, LitkgGraph(litkg::KnowledgeGraph::from_json(read_str(text, "text")?)?)))
}

/// Merges two graphs built from disjoint abstracts.
///
/// # Safety
/// `a` and `b` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn litkg_graph_merge(a: *const LitkgGraph, b: *const LitkgGraph, out: *mut *mut LitkgGraph) -> LitkgStatus {
    guard(|| {
        let merged = borrow(a, "a")?.0.merge(&borrow(b, "b")?.0)?;
        put(out, LitkgGraph(merged))
    })
}

/// # Safety
/// `graph` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn litkg_graph_node_count(graph: *const LitkgGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.0.node_count())
}

/// # Safety
/// `graph` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn litkg_graph_edge_count(graph: *const LitkgGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.0.edge_count())
}

/// Serializes the graph. `batch_size` applies to Cypher only.
///
/// # Safety
/// `graph` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn litkg_graph_export(
    graph: *const LitkgGraph,
    format: LitkgExportFormat,
    batch_size: usize,
    out: *mut *mut c_char,
) -> LitkgStatus {
    guard(|| {
        let g = &borrow(graph, "graph")?.0;
        let text = match format {
            LitkgExportFormat::GraphJson => g.to_json(None),
            LitkgExportFormat::GraphMl => litkg::export::to_graphml(g, None),
            LitkgExportFormat::Cypher => {
                if batch_size == 0 {
                    return Err(Error::InvalidParameter("batch size must be >= 1".into()).into());
                }
                litkg::export::to_cypher(g, batch_size, None)
            }
            LitkgExportFormat::EdgesCsv => litkg::export::export_edges_csv(g),
        };
        put_string(out, &text)
    })
}

/// # Safety
/// `graph` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn litkg_graph_free(graph: *mut LitkgGraph) {
    release(graph)
}

// Embedding

#[no_mangle]
pub extern "C" fn litkg_embed_params_default() -> LitkgEmbedParams {
    let w = WalkParams::default();
    let s = SgnsParams::default();
    LitkgEmbedParams {
        dims: s.dims,
        walk_length: w.walk_length,
        walks_per_node: w.walks_per_node,
        return_param: w.return_param,
        inout_param: w.inout_param,
        window: s.window,
        negatives: s.negatives,
        epochs: s.epochs,
        learning_rate: s.lr0,
        unigram_power: s.unigram_power,
        seed: s.seed,
        threads: s.threads,
    }
}

fn embedding_handle(matrix: litkg::EmbeddingMatrix) -> LitkgEmbedding {
    let ids = matrix.ids.iter().map(|s| c_string(s)).collect();
    LitkgEmbedding { matrix, ids }
}

/// Samples node2vec walks over `graph` and trains skip-gram vectors on them.
///
/// # Safety
/// `graph` and `params` must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn litkg_embed(
    graph: *const LitkgGraph,
    params: *const LitkgEmbedParams,
    out: *mut *mut LitkgEmbedding,
) -> LitkgStatus {
    guard(|| {
        let g = &borrow(graph, "graph")?.0;
        let p = *borrow(params, "params")?;
        let walk = WalkParams {
            walk_length: p.walk_length,
            walks_per_node: p.walks_per_node,
            return_param: p.return_param,
            inout_param: p.inout_param,
            seed: p.seed,
            eager: false,
        };
        let sgns = SgnsParams {
            dims: p.dims,
            window: p.window,
            negatives: p.negatives,
            epochs: p.epochs,
            lr0: p.learning_rate,
            seed: p.seed,
            unigram_power: p.unigram_power,
            threads: p.threads.max(1),
        };
        let walks = litkg::walk::walk_graph(g, &walk)?;
        let matrix = litkg::sgns::train(&walks, &sgns)?;
        put(out, embedding_handle(matrix))
    })
}

/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn litkg_embedding_from_tsv(text: *const c_char, out: *mut *mut LitkgEmbedding) -> LitkgStatus {
    guard(|| put(out, embedding_handle(litkg::formats::embedding_from_tsv(read_str(text, "text")?)?)))
}

/// # Safety
/// `emb` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn litkg_embedding_to_tsv(emb: *const LitkgEmbedding, out: *mut *mut c_char) -> LitkgStatus {
    guard(|| put_string(out, &litkg::formats::embedding_to_tsv(&borrow(emb, "embedding")?.matrix, None)))
}

/// # Safety
/// `emb` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn litkg_embedding_len(emb: *const LitkgEmbedding) -> usize {
    emb.as_ref().map_or(0, |e| e.matrix.len())
}

/// # Safety
/// `emb` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn litkg_embedding_dims(emb: *const LitkgEmbedding) -> usize {
    emb.as_ref().map_or(0, |e| e.matrix.dims)
}

/// Concept id of `row`, borrowed from the handle; null when out of range.
///
/// # Safety
/// `emb` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn litkg_embedding_id(emb: *const LitkgEmbedding, row: usize) -> *const c_char {
    emb.as_ref().and_then(|e| e.ids.get(row)).map_or(ptr::null(), |s| s.as_ptr())
}

/// Copies the vector of `row` into `buf`, which must hold `len >= dims` values.
///
/// # Safety
/// `emb` must be a live handle; `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn litkg_embedding_copy_row(emb: *const LitkgEmbedding, row: usize, buf: *mut f64, len: usize) -> LitkgStatus {
    guard(|| {
        let m = &borrow(emb, "embedding")?.matrix;
        if buf.is_null() {
            return Err(null("buf"));
        }
        if row >= m.len() || len < m.dims {
            return Err(Error::InvalidParameter(format!("row {row} / buffer {len} out of range for {}x{}", m.len(), m.dims)).into());
        }
        ptr::copy_nonoverlapping(m.vector(row).as_ptr(), buf, m.dims);
        Ok(())
    })
}

/// # Safety
/// `emb` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn litkg_embedding_free(emb: *mut LitkgEmbedding) {
    release(emb)
}

// Layout

#[no_mangle]
pub extern "C" fn litkg_tsne_params_default() -> LitkgTsneParams {
    let t = TsneParams::default();
    LitkgTsneParams {
        perplexity: t.perplexity,
        max_iter: t.max_iter,
        learning_rate: t.learning_rate,
        seed: t.seed,
    }
}

/// Exact t-SNE of the embedding rows into the plane.
///
/// # Safety
/// `emb` and `params` must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn litkg_tsne(
    emb: *const LitkgEmbedding,
    params: *const LitkgTsneParams,
    out: *mut *mut LitkgLayout,
) -> LitkgStatus {
    guard(|| {
        let m = &borrow(emb, "embedding")?.matrix;
        let p = *borrow(params, "params")?;
        let params = TsneParams {
            perplexity: p.perplexity,
            max_iter: p.max_iter,
            learning_rate: p.learning_rate,
            seed: p.seed,
            ..Default::default()
        };
        let layout = litkg::tsne::run_tsne(m, &params)?;
        let ids = layout.ids.iter().map(|s| c_string(s)).collect();
        put(out, LitkgLayout { layout, ids })
    })
}

/// # Safety
/// `layout` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn litkg_layout_len(layout: *const LitkgLayout) -> usize {
    layout.as_ref().map_or(0, |l| l.layout.coords.len())
}

/// # Safety
/// `layout` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn litkg_layout_id(layout: *const LitkgLayout, i: usize) -> *const c_char {
    layout.as_ref().and_then(|l| l.ids.get(i)).map_or(ptr::null(), |s| s.as_ptr())
}

/// # Safety
/// `layout` must be a live handle; `x` and `y` must be writable.
#[no_mangle]
pub unsafe extern "C" fn litkg_layout_point(layout: *const LitkgLayout, i: usize, x: *mut f64, y: *mut f64) -> LitkgStatus {
    guard(|| {
        let l = &borrow(layout, "layout")?.layout;
        if x.is_null() || y.is_null() {
            return Err(null("output pointer"));
        }
        let [px, py] = *l
            .coords
            .get(i)
            .ok_or_else(|| Failure::from(Error::InvalidParameter(format!("point {i} out of range"))))?;
        *x = px;
        *y = py;
        Ok(())
    })
}

/// KL divergence of the final layout; NaN for a null handle.
///
/// # Safety
/// `layout` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn litkg_layout_final_kl(layout: *const LitkgLayout) -> f64 {
    layout.as_ref().map_or(f64::NAN, |l| l.layout.final_kl)
}

/// # Safety
/// `layout` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn litkg_layout_free(layout: *mut LitkgLayout) {
    release(layout)
}

// Neighbours

/// The `k` concepts closest to `query`. `graph` may be null; when given,
/// `query` may also be a display name and results carry names.
///
/// # Safety
/// `emb` must be a live handle, `graph` null or live, `query` a
/// NUL-terminated string, and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn litkg_nearest(
    emb: *const LitkgEmbedding,
    graph: *const LitkgGraph,
    query: *const c_char,
    k: usize,
    metric: LitkgMetric,
    out: *mut *mut LitkgNeighbors,
) -> LitkgStatus {
    guard(|| {
        let m = &borrow(emb, "embedding")?.matrix;
        let query = read_str(query, "query")?;
        let catalog = graph.as_ref().map_or_else(ConceptCatalog::default, |g| ConceptCatalog::from_graph(&g.0));
        let metric = match metric {
            LitkgMetric::Euclidean => Metric::Euclidean,
            LitkgMetric::Cosine => Metric::Cosine,
        };
        let result = litkg::query::nearest_neighbors(m, &catalog, query, k, metric)?;
        let n = &result.neighbors;
        put(
            out,
            LitkgNeighbors {
                ids: n.iter().map(|x| c_string(&x.concept_id)).collect(),
                names: n.iter().map(|x| c_string(&x.name)).collect(),
                distances: n.iter().map(|x| x.distance).collect(),
            },
        )
    })
}

/// # Safety
/// `nn` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn litkg_neighbors_len(nn: *const LitkgNeighbors) -> usize {
    nn.as_ref().map_or(0, |n| n.ids.len())
}

/// # Safety
/// `nn` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn litkg_neighbors_id(nn: *const LitkgNeighbors, i: usize) -> *const c_char {
    nn.as_ref().and_then(|n| n.ids.get(i)).map_or(ptr::null(), |s| s.as_ptr())
}

/// # Safety
/// `nn` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn litkg_neighbors_name(nn: *const LitkgNeighbors, i: usize) -> *const c_char {
    nn.as_ref().and_then(|n| n.names.get(i)).map_or(ptr::null(), |s| s.as_ptr())
}

/// Distance of neighbour `i`; NaN when out of range.
///
/// # Safety
/// `nn` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn litkg_neighbors_distance(nn: *const LitkgNeighbors, i: usize) -> f64 {
    nn.as_ref().and_then(|n| n.distances.get(i)).copied().unwrap_or(f64::NAN)
}

/// # Safety
/// `nn` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn litkg_neighbors_free(nn: *mut LitkgNeighbors) {
    release(nn)
}
