//! File formats for embeddings and layouts, plus the provenance header that
//! every artifact written by the command-line tool carries.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::KnowledgeGraph;
use crate::sgns::EmbeddingMatrix;
use crate::tsne::ScatterLayout;

pub const TOOL_NAME: &str = "litkg";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Formats like C's `%.{sig}g`: `sig` significant digits, trailing zeros trimmed.
pub fn format_sig(x: f64, sig: usize) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", sig - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= sig as i32 {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Provenance recorded in output headers: tool version, hashed inputs, and
/// the parameters that shaped the output. Contains no timestamps so reruns
/// are byte-identical.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Input file name → SHA-256.
    pub inputs: BTreeMap<String, String>,
    pub params: BTreeMap<String, String>,
}

impl Provenance {
    pub fn new(command: &str) -> Self {
        Provenance {
            tool: TOOL_NAME.into(),
            version: TOOL_VERSION.into(),
            command: command.into(),
            ..Default::default()
        }
    }

    pub fn param(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.into(), value.to_string());
        self
    }

    pub fn input_bytes(mut self, name: &str, bytes: &[u8]) -> Self {
        self.inputs.insert(name.into(), hex::encode(Sha256::digest(bytes)));
        self
    }

    pub fn input_file(self, path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        Ok(self.input_bytes(&name, &bytes))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("provenance serializes")
    }

    /// Single-line `key=value` rendering for comment headers.
    pub fn to_line(&self) -> String {
        let mut parts = vec![format!("tool={}", self.tool), format!("version={}", self.version), format!("command={}", self.command)];
        parts.extend(self.inputs.iter().map(|(k, v)| format!("input:{k}={v}")));
        parts.extend(self.params.iter().map(|(k, v)| format!("{k}={v}")));
        parts.join(" ")
    }
}

/// Embedding TSV: `#dims=D count=N mode=input seed=S` header, optional
/// further `#` lines, then `id<TAB>v1<TAB>…<TAB>vD` rows sorted by id with
/// 9 significant digits.
pub fn embedding_to_tsv(emb: &EmbeddingMatrix, provenance: Option<&Provenance>) -> String {
    let seed = emb.params.as_ref().map(|p| p.seed.to_string()).unwrap_or_else(|| "none".into());
    let mut out = format!("#dims={} count={} mode=input seed={}\n", emb.dims, emb.len(), seed);
    if let Some(p) = provenance {
        out.push_str(&format!("#provenance {}\n", p.to_line()));
    }
    let mut order: Vec<usize> = (0..emb.len()).collect();
    order.sort_by(|&a, &b| emb.ids[a].cmp(&emb.ids[b]));
    for r in order {
        out.push_str(&emb.ids[r]);
        for v in emb.vector(r) {
            out.push('\t');
            out.push_str(&format_sig(*v, 9));
        }
        out.push('\n');
    }
    out
}

pub fn embedding_from_tsv(text: &str) -> Result<EmbeddingMatrix> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse("embedding tsv", "empty file"))?;
    let fields: BTreeMap<&str, &str> = header
        .strip_prefix('#')
        .ok_or_else(|| Error::parse("embedding tsv", "missing #dims header"))?
        .split_whitespace()
        .filter_map(|kv| kv.split_once('='))
        .collect();
    let dims: usize = fields
        .get("dims")
        .and_then(|d| d.parse().ok())
        .ok_or_else(|| Error::parse("embedding tsv header", "dims"))?;
    let count: usize = fields
        .get("count")
        .and_then(|d| d.parse().ok())
        .ok_or_else(|| Error::parse("embedding tsv header", "count"))?;
    let mut ids = Vec::with_capacity(count);
    let mut rows = Vec::with_capacity(count);
    for (i, line) in lines {
        if line.starts_with('#') || line.is_empty() {
            continue;
        }
        let mut parts = line.split('\t');
        let id = parts.next().unwrap_or_default().to_string();
        let row: Vec<f64> = parts
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::parse(format!("embedding tsv line {}", i + 1), e.to_string()))?;
        if row.len() != dims {
            return Err(Error::parse(
                format!("embedding tsv line {}", i + 1),
                format!("expected {dims} values, found {}", row.len()),
            ));
        }
        ids.push(id);
        rows.push(row);
    }
    if ids.len() != count {
        return Err(Error::parse(
            "embedding tsv",
            format!("header says count={count} but found {} rows", ids.len()),
        ));
    }
    let mut emb = EmbeddingMatrix::from_rows(ids, rows)?;
    emb.dims = dims;
    Ok(emb)
}

/// Layout CSV `concept_id,x,y,category,name`, sorted by concept id.
pub fn layout_to_csv(layout: &ScatterLayout, graph: &KnowledgeGraph, provenance: Option<&Provenance>) -> String {
    let mut out = String::new();
    if let Some(p) = provenance {
        out.push_str(&format!("# {}\n", p.to_line()));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["concept_id", "x", "y", "category", "name"]).expect("in-memory csv");
    let mut order: Vec<usize> = (0..layout.ids.len()).collect();
    order.sort_by(|&a, &b| layout.ids[a].cmp(&layout.ids[b]));
    for i in order {
        let id = &layout.ids[i];
        let category = graph
            .nodes
            .get(id)
            .map(|n| n.category)
            .or_else(|| crate::pubtator::ConceptCategory::from_concept_id(id))
            .map(|c| c.label())
            .unwrap_or("");
        w.write_record([
            id.as_str(),
            &format_sig(layout.coords[i][0], 9),
            &format_sig(layout.coords[i][1], 9),
            category,
            graph.name_of(id),
        ])
        .expect("in-memory csv");
    }
    out.push_str(&String::from_utf8(w.into_inner().expect("flush")).expect("utf-8"));
    out
}

/// Reads a layout CSV back as (ids, coordinates).
pub fn layout_from_csv(text: &str) -> Result<ScatterLayout> {
    let body: String = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect();
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let mut ids = Vec::new();
    let mut coords = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::parse("layout csv", e.to_string()))?;
        let num = |k: usize| -> Result<f64> {
            rec.get(k)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::parse(format!("layout csv row {}", i + 1), "bad coordinate"))
        };
        ids.push(rec.get(0).unwrap_or_default().to_string());
        coords.push([num(1)?, num(2)?]);
    }
    Ok(ScatterLayout {
        ids,
        coords,
        final_kl: f64::NAN,
        iterations: 0,
        kl_trace: Vec::new(),
    })
}

/// KL trace CSV `iter,kl`, where row `k` is the divergence after `k` updates.
pub fn kl_trace_csv(layout: &ScatterLayout, provenance: Option<&Provenance>) -> String {
    let mut out = String::new();
    if let Some(p) = provenance {
        out.push_str(&format!("# {}\n", p.to_line()));
    }
    out.push_str("iter,kl\n");
    for (i, kl) in layout.kl_trace.iter().enumerate() {
        out.push_str(&format!("{i},{}\n", format_sig(*kl, 9)));
    }
    out
}
