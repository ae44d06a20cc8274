//! PubMed search and PubTator annotation retrieval.
//!
//! All network access goes through the [`Transport`] trait and all waiting
//! through [`Clock`], so tests run against counting or scripted fakes. A
//! fixture directory replaces the network entirely:
//!
//! ```text
//! fixtures/search/<sha256-of-search-term>.json   esearch-style JSON
//! fixtures/annotations/<pmid>.txt                 one PubTator block
//! ```

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use chrono::{DateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const DEFAULT_SEARCH_BASE: &str = "https://eutils.ncbi.nlm.nih.gov/entrez/eutils";
pub const DEFAULT_ANNOTATION_BASE: &str = "https://www.ncbi.nlm.nih.gov/research/pubtator3-api";
pub const ENV_API_BASE: &str = "LITKG_API_BASE";
pub const ENV_API_KEY: &str = "LITKG_API_KEY";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchQuery {
    pub disease_terms: Vec<String>,
    pub diet_terms: Vec<String>,
    pub rendered: String,
}

impl SearchQuery {
    pub fn new(disease_terms: Vec<String>, diet_terms: Vec<String>) -> Result<Self> {
        if disease_terms.is_empty() || diet_terms.is_empty() {
            return Err(Error::InvalidParameter(
                "query needs at least one disease term and one diet term".into(),
            ));
        }
        let rendered = format!("({}) AND ({})", disease_terms.join(" OR "), diet_terms.join(" OR "));
        Ok(SearchQuery {
            disease_terms,
            diet_terms,
            rendered,
        })
    }
}

/// Neurodegenerative-disease × diet query.
pub fn default_query() -> SearchQuery {
    let disease = [
        "Alzheimer's disease",
        "Parkinson's disease",
        "Prion disease",
        "Huntington disease",
        "neurodegenerative disease",
    ];
    let diet = ["eat", "diet", "food"];
    SearchQuery::new(
        disease.iter().map(|s| s.to_string()).collect(),
        diet.iter().map(|s| s.to_string()).collect(),
    )
    .expect("default terms are non-empty")
}

/// Optional search restrictions, appended to the term as PubMed field tags.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchFilters {
    /// Inclusive publication-year range, rendered as `YYYY:YYYY[dp]`.
    pub years: Option<(u16, u16)>,
    /// Publication types, rendered as `"type"[pt]` alternatives.
    pub publication_types: Vec<String>,
}

impl SearchFilters {
    /// The full term sent to the search service.
    pub fn apply(&self, query: &SearchQuery) -> String {
        let mut term = query.rendered.clone();
        if let Some((from, to)) = self.years {
            term.push_str(&format!(" AND ({from}:{to}[dp])"));
        }
        if !self.publication_types.is_empty() {
            let types: Vec<String> = self
                .publication_types
                .iter()
                .map(|t| format!("\"{t}\"[pt]"))
                .collect();
            term.push_str(&format!(" AND ({})", types.join(" OR ")));
        }
        term
    }
}

pub fn fixture_key(term: &str) -> String {
    hex::encode(Sha256::digest(term.as_bytes()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Live,
    Fixture,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FetchManifest {
    pub query: SearchQuery,
    pub term: String,
    pub pmids: Vec<String>,
    /// Retrieval time; fixture manifests carry the Unix epoch.
    pub retrieved_at: DateTime<Utc>,
    pub source: Source,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

/// Transport-level failure (connection refused, timeout, ...).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransportError(pub String);

pub trait Transport: Send + Sync {
    fn get(&self, url: &str) -> std::result::Result<HttpResponse, TransportError>;
}

/// Blocking HTTP transport.
pub struct HttpTransport {
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(timeout: Duration) -> Self {
        HttpTransport {
            agent: ureq::AgentBuilder::new()
                .timeout(timeout)
                .user_agent(concat!("litkg/", env!("CARGO_PKG_VERSION")))
                .build(),
        }
    }
}

impl Default for HttpTransport {
    fn default() -> Self {
        HttpTransport::new(Duration::from_secs(60))
    }
}

impl Transport for HttpTransport {
    fn get(&self, url: &str) -> std::result::Result<HttpResponse, TransportError> {
        match self.agent.get(url).call() {
            Ok(resp) => {
                let status = resp.status();
                let body = resp.into_string().map_err(|e| TransportError(e.to_string()))?;
                Ok(HttpResponse { status, body })
            }
            Err(ureq::Error::Status(status, resp)) => Ok(HttpResponse {
                status,
                body: resp.into_string().unwrap_or_default(),
            }),
            Err(e) => Err(TransportError(e.to_string())),
        }
    }
}

/// Monotonic time source used for rate limiting and backoff.
pub trait Clock: Send + Sync {
    fn now(&self) -> Duration;
    fn sleep(&self, d: Duration);
}

pub struct SystemClock {
    origin: Instant,
}

impl Default for SystemClock {
    fn default() -> Self {
        SystemClock { origin: Instant::now() }
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }

    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }
}

/// Spaces requests at least `1 / rate` apart. Shareable across threads.
pub struct RateLimiter {
    interval: Duration,
    next_slot: Mutex<Option<Duration>>,
}

impl RateLimiter {
    pub fn new(requests_per_second: f64) -> Result<Self> {
        if !(requests_per_second > 0.0 && requests_per_second.is_finite()) {
            return Err(Error::InvalidParameter("rate ceiling must be > 0".into()));
        }
        Ok(RateLimiter {
            // Rounded up so N requests never fit in a window shorter than N / rate.
            interval: Duration::from_nanos((1e9 / requests_per_second).ceil() as u64),
            next_slot: Mutex::new(None),
        })
    }

    /// Blocks (via `clock`) until a request may be sent.
    pub fn acquire(&self, clock: &dyn Clock) {
        let mut slot = self.next_slot.lock().expect("rate limiter poisoned");
        let now = clock.now();
        let at = match *slot {
            Some(next) if next > now => {
                clock.sleep(next - now);
                next
            }
            _ => now,
        };
        *slot = Some(at + self.interval);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FetchConfig {
    pub search_base: String,
    pub annotation_base: String,
    pub api_key: Option<String>,
    pub requests_per_second: f64,
    pub page_size: usize,
    pub max_retries: u32,
    pub initial_backoff: Duration,
    /// PMIDs per annotation export request.
    pub annotation_batch: usize,
}

impl Default for FetchConfig {
    fn default() -> Self {
        FetchConfig {
            search_base: DEFAULT_SEARCH_BASE.into(),
            annotation_base: DEFAULT_ANNOTATION_BASE.into(),
            api_key: None,
            requests_per_second: 3.0,
            page_size: 200,
            max_retries: 3,
            initial_backoff: Duration::from_millis(500),
            annotation_batch: 100,
        }
    }
}

impl FetchConfig {
    /// Applies `LITKG_API_BASE` (both services served under one base) and
    /// `LITKG_API_KEY` from the environment.
    pub fn with_env(mut self) -> Self {
        if let Ok(base) = std::env::var(ENV_API_BASE) {
            let base = base.trim_end_matches('/').to_string();
            self.search_base = base.clone();
            self.annotation_base = base;
        }
        if let Ok(key) = std::env::var(ENV_API_KEY) {
            if !key.is_empty() {
                self.api_key = Some(key);
            }
        }
        self
    }
}

/// Annotation text plus the PMIDs the service had nothing for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationBatch {
    pub text: String,
    pub skipped: Vec<String>,
}

pub struct Fetcher {
    transport: Arc<dyn Transport>,
    clock: Arc<dyn Clock>,
    limiter: Arc<RateLimiter>,
    config: FetchConfig,
    fixtures: Option<PathBuf>,
}

impl Fetcher {
    pub fn new(
        transport: Arc<dyn Transport>,
        clock: Arc<dyn Clock>,
        limiter: Arc<RateLimiter>,
        config: FetchConfig,
    ) -> Self {
        Fetcher {
            transport,
            clock,
            limiter,
            config,
            fixtures: None,
        }
    }

    pub fn live(config: FetchConfig) -> Result<Self> {
        let limiter = Arc::new(RateLimiter::new(config.requests_per_second)?);
        Ok(Fetcher::new(
            Arc::new(HttpTransport::default()),
            Arc::new(SystemClock::default()),
            limiter,
            config,
        ))
    }

    /// Serve everything from `dir`; the transport is never used.
    pub fn with_fixtures(mut self, dir: impl Into<PathBuf>) -> Self {
        self.fixtures = Some(dir.into());
        self
    }

    pub fn source(&self) -> Source {
        if self.fixtures.is_some() {
            Source::Fixture
        } else {
            Source::Live
        }
    }

    fn get_with_retry(&self, url: &str) -> Result<String> {
        let mut backoff = self.config.initial_backoff;
        let attempts_allowed = self.config.max_retries + 1;
        let mut last_error = String::new();
        let mut rate_limited = false;
        for attempt in 1..=attempts_allowed {
            self.limiter.acquire(self.clock.as_ref());
            match self.transport.get(url) {
                Ok(resp) if (200..300).contains(&resp.status) => return Ok(resp.body),
                Ok(resp) if resp.status == 429 => {
                    rate_limited = true;
                    last_error = "HTTP 429".into();
                }
                Ok(resp) if resp.status >= 500 => {
                    rate_limited = false;
                    last_error = format!("HTTP {}", resp.status);
                }
                Ok(resp) => {
                    return Err(Error::Network {
                        attempts: attempt,
                        message: format!("HTTP {} from {}", resp.status, redact(url)),
                    })
                }
                Err(TransportError(msg)) => {
                    rate_limited = false;
                    last_error = msg;
                }
            }
            if attempt < attempts_allowed {
                log::warn!("request failed ({last_error}); retrying in {backoff:?}");
                self.clock.sleep(backoff);
                backoff *= 2;
            }
        }
        if rate_limited {
            Err(Error::RateLimited {
                attempts: attempts_allowed,
            })
        } else {
            Err(Error::Network {
                attempts: attempts_allowed,
                message: last_error,
            })
        }
    }

    fn with_key(&self, mut url: String) -> String {
        if let Some(key) = &self.config.api_key {
            url.push_str("&api_key=");
            url.push_str(&encode(key));
        }
        url
    }

    /// Up to `limit` unique PMIDs matching `query`, in service order.
    pub fn search_pmids(&self, query: &SearchQuery, filters: &SearchFilters, limit: usize) -> Result<FetchManifest> {
        if limit == 0 {
            return Err(Error::InvalidParameter("limit must be > 0".into()));
        }
        let term = filters.apply(query);
        let mut pmids = Vec::new();
        let mut seen = HashSet::new();
        let mut push = |ids: Vec<String>, pmids: &mut Vec<String>| {
            for id in ids {
                if pmids.len() >= limit {
                    break;
                }
                if seen.insert(id.clone()) {
                    pmids.push(id);
                }
            }
        };

        let retrieved_at = match &self.fixtures {
            Some(dir) => {
                let path = dir.join("search").join(format!("{}.json", fixture_key(&term)));
                let body = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                let page = parse_search_page(&body)?;
                push(page.ids, &mut pmids);
                Utc.timestamp_opt(0, 0).single().expect("epoch")
            }
            None => {
                let mut start = 0usize;
                loop {
                    let url = self.with_key(format!(
                        "{}/esearch.fcgi?db=pubmed&retmode=json&retstart={}&retmax={}&term={}",
                        self.config.search_base,
                        start,
                        self.config.page_size,
                        encode(&term)
                    ));
                    let page = parse_search_page(&self.get_with_retry(&url)?)?;
                    let got = page.ids.len();
                    push(page.ids, &mut pmids);
                    start += got;
                    if pmids.len() >= limit || got == 0 || start >= page.count {
                        break;
                    }
                }
                Utc::now()
            }
        };

        Ok(FetchManifest {
            query: query.clone(),
            term,
            pmids,
            retrieved_at,
            source: self.source(),
        })
    }

    /// PubTator blocks for every manifest PMID, in manifest order.
    pub fn fetch_annotations(&self, manifest: &FetchManifest) -> Result<AnnotationBatch> {
        if manifest.pmids.is_empty() {
            return Err(Error::EmptyInput("manifest has no PMIDs".into()));
        }
        let mut blocks: std::collections::HashMap<String, String> = std::collections::HashMap::new();
        match &self.fixtures {
            Some(dir) => {
                for pmid in &manifest.pmids {
                    let path = dir.join("annotations").join(format!("{pmid}.txt"));
                    match std::fs::read_to_string(&path) {
                        Ok(text) => {
                            blocks.insert(pmid.clone(), text.trim_end().to_string());
                        }
                        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
                        Err(e) => return Err(Error::io(&path, e)),
                    }
                }
            }
            None => {
                for chunk in manifest.pmids.chunks(self.config.annotation_batch.max(1)) {
                    let url = self.with_key(format!(
                        "{}/publications/export/pubtator?pmids={}",
                        self.config.annotation_base,
                        chunk.join(",")
                    ));
                    let body = self.get_with_retry(&url)?;
                    for (pmid, block) in split_blocks_by_pmid(&body) {
                        blocks.entry(pmid).or_insert(block);
                    }
                }
            }
        }

        let mut text = String::new();
        let mut skipped = Vec::new();
        for pmid in &manifest.pmids {
            match blocks.get(pmid) {
                Some(block) => {
                    if !text.is_empty() {
                        text.push('\n');
                    }
                    text.push_str(block);
                    text.push('\n');
                }
                None => skipped.push(pmid.clone()),
            }
        }
        if !skipped.is_empty() {
            log::warn!("{} PMID(s) had no annotations", skipped.len());
        }
        Ok(AnnotationBatch { text, skipped })
    }
}

fn encode(s: &str) -> String {
    url::form_urlencoded::byte_serialize(s.as_bytes()).collect()
}

fn redact(url: &str) -> String {
    match url.find("api_key=") {
        Some(i) => format!("{}api_key=***", &url[..i]),
        None => url.to_string(),
    }
}

#[derive(Debug)]
struct SearchPage {
    ids: Vec<String>,
    count: usize,
}

fn parse_search_page(body: &str) -> Result<SearchPage> {
    let v: serde_json::Value =
        serde_json::from_str(body).map_err(|e| Error::parse("search response", e.to_string()))?;
    let result = v
        .get("esearchresult")
        .ok_or_else(|| Error::parse("search response", "missing field `esearchresult`"))?;
    let idlist = result
        .get("idlist")
        .and_then(|l| l.as_array())
        .ok_or_else(|| Error::parse("search response", "missing or non-array field `esearchresult.idlist`"))?;
    let mut ids = Vec::with_capacity(idlist.len());
    for item in idlist {
        let id = item
            .as_str()
            .filter(|s| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit()))
            .ok_or_else(|| Error::parse("search response", format!("field `esearchresult.idlist` holds non-PMID {item}")))?;
        ids.push(id.to_string());
    }
    let count = match result.get("count") {
        None => ids.len(),
        Some(c) => c
            .as_str()
            .and_then(|s| s.parse().ok())
            .or_else(|| c.as_u64().map(|n| n as usize))
            .ok_or_else(|| Error::parse("search response", "field `esearchresult.count` is not a number"))?,
    };
    Ok(SearchPage { ids, count })
}

/// Splits a multi-document PubTator response into per-PMID blocks.
fn split_blocks_by_pmid(text: &str) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for block in text.split("\n\n") {
        let block = block.trim_matches('\n');
        if block.is_empty() {
            continue;
        }
        let pmid: String = block.chars().take_while(|c| c.is_ascii_digit()).collect();
        if !pmid.is_empty() {
            out.push((pmid, block.to_string()));
        }
    }
    out
}

/// Writes a manifest as pretty JSON.
pub fn manifest_to_json(manifest: &FetchManifest) -> String {
    let mut s = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    s.push('\n');
    s
}

pub fn manifest_from_json(text: &str) -> Result<FetchManifest> {
    serde_json::from_str(text).map_err(|e| Error::parse("manifest", e.to_string()))
}

/// Lays out a fixture directory that `Fetcher::with_fixtures` can serve.
pub fn write_fixture(dir: &Path, term: &str, pmids: &[String], blocks: &[(String, String)]) -> Result<()> {
    let search = dir.join("search");
    let ann = dir.join("annotations");
    for d in [&search, &ann] {
        std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    let body = serde_json::json!({
        "esearchresult": { "count": pmids.len().to_string(), "idlist": pmids }
    });
    let path = search.join(format!("{}.json", fixture_key(term)));
    std::fs::write(&path, serde_json::to_string_pretty(&body).expect("json")).map_err(|e| Error::io(&path, e))?;
    for (pmid, block) in blocks {
        let path = ann.join(format!("{pmid}.txt"));
        std::fs::write(&path, format!("{}\n", block.trim_end())).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
