//! Reader for PubTator plain-text annotation exports.
//!
//! A PubTator file is a sequence of blocks separated by blank lines. Each
//! block describes one abstract:
//!
//! ```text
//! 12345|t|Title text
//! 12345|a|Abstract text
//! 12345	0	5	Title	Disease	MESH:D000001
//! ```
//!
//! Mention offsets index characters of `title + " " + body`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ConceptCategory {
    Disease,
    Chemical,
    Gene,
    Species,
    #[serde(rename = "SNP&Mutation")]
    SnpMutation,
}

impl ConceptCategory {
    pub const ALL: [ConceptCategory; 5] = [
        ConceptCategory::Disease,
        ConceptCategory::Chemical,
        ConceptCategory::Gene,
        ConceptCategory::Species,
        ConceptCategory::SnpMutation,
    ];

    /// Namespace prefix used in concept identifiers.
    pub fn prefix(self) -> &'static str {
        match self {
            ConceptCategory::Disease => "Disease",
            ConceptCategory::Chemical => "Chemical",
            ConceptCategory::Gene => "Gene",
            ConceptCategory::Species => "Species",
            ConceptCategory::SnpMutation => "Mutation",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ConceptCategory::SnpMutation => "SNP&Mutation",
            other => other.prefix(),
        }
    }

    /// Recovers the category from a namespaced concept id.
    pub fn from_concept_id(id: &str) -> Option<Self> {
        let prefix = id.split(':').next()?;
        Self::ALL.into_iter().find(|c| c.prefix() == prefix)
    }
}

impl fmt::Display for ConceptCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ConceptCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.label() == s || c.prefix() == s)
            .ok_or_else(|| Error::parse("category", format!("unknown category {s:?}")))
    }
}

/// Maps a raw PubTator annotation type onto one of the five categories.
/// `None` means the type is out of scope and the mention is ignored.
pub fn map_category(rawtype: &str) -> Option<ConceptCategory> {
    match rawtype {
        "Disease" => Some(ConceptCategory::Disease),
        "Chemical" => Some(ConceptCategory::Chemical),
        "Gene" => Some(ConceptCategory::Gene),
        "Species" => Some(ConceptCategory::Species),
        "SNP" | "DNAMutation" | "ProteinMutation" | "Mutation" => Some(ConceptCategory::SnpMutation),
        _ => None,
    }
}

/// Builds the namespaced concept id, or `None` when the raw id is missing.
///
/// Raw ids are kept verbatim (including `MESH:` prefixes), so the same
/// vocabulary entry collides across documents while different categories
/// never do.
pub fn normalize_concept_id(category: ConceptCategory, rawid: &str) -> Option<String> {
    let rawid = rawid.trim();
    if rawid.is_empty() || rawid == "-" {
        return None;
    }
    Some(format!("{}:{}", category.prefix(), rawid))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityMention {
    pub pmid: String,
    pub start: usize,
    pub end: usize,
    pub surface: String,
    pub category: ConceptCategory,
    pub concept_id: String,
}

impl EntityMention {
    fn sort_key(&self) -> (usize, usize, &str) {
        (self.start, self.end, &self.concept_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbstractDoc {
    pub pmid: String,
    pub title: String,
    pub body: String,
    pub mentions: Vec<EntityMention>,
}

impl AbstractDoc {
    /// The text mention offsets refer to.
    pub fn text(&self) -> String {
        format!("{} {}", self.title, self.body)
    }

    pub fn sort_mentions(&mut self) {
        self.mentions.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    }

    /// One line of the canonical corpus file, without trailing newline.
    pub fn to_canonical_json(&self) -> String {
        let mut mentions: Vec<&EntityMention> = self.mentions.iter().collect();
        mentions.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        let record = DocRecord {
            pmid: &self.pmid,
            title: &self.title,
            body: &self.body,
            mentions: mentions
                .into_iter()
                .map(|m| MentionRecord {
                    start: m.start,
                    end: m.end,
                    surface: &m.surface,
                    category: m.category,
                    concept_id: &m.concept_id,
                })
                .collect(),
        };
        serde_json::to_string(&record).expect("doc serialization is infallible")
    }

    fn fingerprint(&self) -> [u8; 32] {
        Sha256::digest(self.to_canonical_json().as_bytes()).into()
    }
}

#[derive(Serialize)]
struct DocRecord<'a> {
    pmid: &'a str,
    title: &'a str,
    body: &'a str,
    mentions: Vec<MentionRecord<'a>>,
}

#[derive(Serialize)]
struct MentionRecord<'a> {
    start: usize,
    end: usize,
    surface: &'a str,
    category: ConceptCategory,
    concept_id: &'a str,
}

#[derive(Deserialize)]
struct OwnedDocRecord {
    pmid: String,
    title: String,
    body: String,
    mentions: Vec<OwnedMentionRecord>,
}

#[derive(Deserialize)]
struct OwnedMentionRecord {
    start: usize,
    end: usize,
    surface: String,
    category: ConceptCategory,
    concept_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockError {
    /// 1-based line number of the block's first line.
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MentionError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub docs: Vec<AbstractDoc>,
    /// Mentions discarded because they carried no concept identifier.
    pub dropped_mentions: usize,
    /// Raw annotation types outside the five categories.
    pub ignored_type_counts: BTreeMap<String, usize>,
    pub block_errors: Vec<BlockError>,
    pub mention_errors: Vec<MentionError>,
    /// Mentions whose offsets overrun the text or disagree with the surface form.
    pub offset_warnings: usize,
    /// Tab-separated lines with at least five fields inside accepted blocks.
    pub annotation_lines: usize,
}

impl Corpus {
    pub fn from_docs(docs: Vec<AbstractDoc>) -> Self {
        Corpus {
            docs,
            ..Default::default()
        }
    }

    pub fn mention_count(&self) -> usize {
        self.docs.iter().map(|d| d.mentions.len()).sum()
    }

    /// Order-independent corpus fingerprint: XOR of per-document SHA-256
    /// digests of the canonical JSON lines. Disjoint unions XOR together.
    pub fn fingerprint(&self) -> String {
        let mut acc = [0u8; 32];
        for doc in &self.docs {
            xor_into(&mut acc, &doc.fingerprint());
        }
        hex::encode(acc)
    }

    /// Canonical line-delimited JSON, one document per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for doc in &self.docs {
            out.push_str(&doc.to_canonical_json());
            out.push('\n');
        }
        out
    }

    /// Reads the canonical corpus file. Lines starting with `{"_provenance"`
    /// are metadata and skipped; blank lines are ignored.
    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut docs = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with("{\"_provenance\"") {
                continue;
            }
            let record: OwnedDocRecord = serde_json::from_str(line)
                .map_err(|e| Error::parse(format!("corpus line {}", lineno + 1), e.to_string()))?;
            if !seen.insert(record.pmid.clone()) {
                return Err(Error::parse(
                    format!("corpus line {}", lineno + 1),
                    format!("duplicate pmid {}", record.pmid),
                ));
            }
            let pmid = record.pmid;
            let mentions = record
                .mentions
                .into_iter()
                .map(|m| EntityMention {
                    pmid: pmid.clone(),
                    start: m.start,
                    end: m.end,
                    surface: m.surface,
                    category: m.category,
                    concept_id: m.concept_id,
                })
                .collect();
            docs.push(AbstractDoc {
                pmid,
                title: record.title,
                body: record.body,
                mentions,
            });
        }
        Ok(Corpus::from_docs(docs))
    }

    /// Serializes back to PubTator text. Mentions are written in canonical order.
    pub fn to_pubtator(&self) -> String {
        let mut out = String::new();
        for (i, doc) in self.docs.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            out.push_str(&format!("{}|t|{}\n{}|a|{}\n", doc.pmid, doc.title, doc.pmid, doc.body));
            let mut mentions: Vec<&EntityMention> = doc.mentions.iter().collect();
            mentions.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
            for m in mentions {
                let rawid = m
                    .concept_id
                    .split_once(':')
                    .map(|(_, rest)| rest)
                    .unwrap_or(&m.concept_id);
                let rawtype = match m.category {
                    ConceptCategory::SnpMutation => "Mutation",
                    c => c.prefix(),
                };
                out.push_str(&format!(
                    "{}\t{}\t{}\t{}\t{}\t{}\n",
                    doc.pmid, m.start, m.end, m.surface, rawtype, rawid
                ));
            }
        }
        out
    }
}

pub(crate) fn xor_into(acc: &mut [u8; 32], digest: &[u8; 32]) {
    for (a, b) in acc.iter_mut().zip(digest) {
        *a ^= b;
    }
}

struct RawBlock<'a> {
    first_line: usize,
    lines: Vec<(usize, &'a str)>,
}

#[derive(Default)]
struct BlockOutcome {
    doc: Option<AbstractDoc>,
    error: Option<BlockError>,
    dropped: usize,
    ignored: BTreeMap<String, usize>,
    mention_errors: Vec<MentionError>,
    offset_warnings: usize,
    annotation_lines: usize,
}

fn split_blocks(text: &str) -> Vec<RawBlock<'_>> {
    let mut blocks = Vec::new();
    let mut current: Option<RawBlock<'_>> = None;
    for (i, line) in text.lines().enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            if let Some(block) = current.take() {
                blocks.push(block);
            }
            continue;
        }
        current
            .get_or_insert_with(|| RawBlock {
                first_line: i + 1,
                lines: Vec::new(),
            })
            .lines
            .push((i + 1, line));
    }
    blocks.extend(current);
    blocks
}

/// Splits `PMID|t|text` style lines. Returns (pmid, kind, text).
fn split_text_line(line: &str) -> Option<(&str, &str, &str)> {
    let mut parts = line.splitn(3, '|');
    let pmid = parts.next()?;
    let kind = parts.next()?;
    let rest = parts.next()?;
    if pmid.is_empty() || !pmid.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    Some((pmid, kind, rest))
}

fn parse_block(block: &RawBlock<'_>) -> BlockOutcome {
    let mut out = BlockOutcome::default();
    let mut pmid: Option<&str> = None;
    let mut title: Option<&str> = None;
    let mut body: Option<&str> = None;
    let mut annotations: Vec<(usize, Vec<&str>)> = Vec::new();

    for &(lineno, line) in &block.lines {
        if line.contains('\t') {
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() >= 5 {
                annotations.push((lineno, fields));
            }
            // Shorter tab lines are relation records; not mentions.
            continue;
        }
        match split_text_line(line) {
            Some((id, "t", text)) => {
                pmid = Some(id);
                title = Some(text);
            }
            Some((id, "a", text)) => {
                pmid.get_or_insert(id);
                body = Some(text);
            }
            _ => {}
        }
    }

    let Some(title) = title else {
        out.error = Some(BlockError {
            line: block.first_line,
            message: "block has no title line".into(),
        });
        return out;
    };
    let pmid = pmid.expect("title line sets pmid").to_string();
    let body = body.unwrap_or("").to_string();
    let text: Vec<char> = format!("{title} {body}").chars().collect();
    out.annotation_lines = annotations.len();

    let mut mentions = Vec::new();
    for (lineno, fields) in annotations {
        let bad = |message: String| MentionError { line: lineno, message };
        if fields[0] != pmid {
            out.mention_errors
                .push(bad(format!("pmid {} does not match block pmid {pmid}", fields[0])));
            continue;
        }
        let (start, end) = match (fields[1].trim().parse::<usize>(), fields[2].trim().parse::<usize>()) {
            (Ok(s), Ok(e)) => (s, e),
            _ => {
                out.mention_errors
                    .push(bad(format!("non-integer offsets {:?}..{:?}", fields[1], fields[2])));
                continue;
            }
        };
        if start >= end {
            out.mention_errors.push(bad(format!("empty span {start}..{end}")));
            continue;
        }
        let rawtype = fields[4].trim();
        let Some(category) = map_category(rawtype) else {
            *out.ignored.entry(rawtype.to_string()).or_default() += 1;
            continue;
        };
        let Some(concept_id) = normalize_concept_id(category, fields.get(5).copied().unwrap_or("")) else {
            out.dropped += 1;
            continue;
        };
        let surface = fields[3].to_string();
        let in_bounds = end <= text.len()
            && text[start..end].iter().copied().eq(surface.chars());
        if !in_bounds {
            out.offset_warnings += 1;
        }
        mentions.push(EntityMention {
            pmid: pmid.clone(),
            start,
            end,
            surface,
            category,
            concept_id,
        });
    }

    out.doc = Some(AbstractDoc {
        pmid,
        title: title.to_string(),
        body,
        mentions,
    });
    out
}

/// Parses PubTator text into a corpus. Malformed blocks and mentions are
/// collected on the corpus rather than aborting the parse.
pub fn parse_pubtator(text: &str) -> Corpus {
    let blocks = split_blocks(text);
    let outcomes: Vec<BlockOutcome> = blocks.par_iter().map(parse_block).collect();

    let mut corpus = Corpus::default();
    let mut seen = std::collections::HashSet::new();
    for (block, outcome) in blocks.iter().zip(outcomes) {
        if let Some(err) = outcome.error {
            corpus.block_errors.push(err);
            continue;
        }
        let doc = outcome.doc.expect("accepted block yields a doc");
        if !seen.insert(doc.pmid.clone()) {
            corpus.block_errors.push(BlockError {
                line: block.first_line,
                message: format!("duplicate pmid {}", doc.pmid),
            });
            continue;
        }
        corpus.dropped_mentions += outcome.dropped;
        for (k, v) in outcome.ignored {
            *corpus.ignored_type_counts.entry(k).or_default() += v;
        }
        corpus.mention_errors.extend(outcome.mention_errors);
        corpus.offset_warnings += outcome.offset_warnings;
        corpus.annotation_lines += outcome.annotation_lines;
        corpus.docs.push(doc);
    }
    corpus
}

/// Reads PubTator text from any reader; only I/O failures are fatal.
pub fn read_pubtator<R: std::io::Read>(mut reader: R) -> std::io::Result<Corpus> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    Ok(parse_pubtator(&text))
}
