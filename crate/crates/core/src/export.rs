//! Interchange formats for the knowledge graph and the 2-D layout:
//! GraphML, a Cypher import script, an edge CSV, and an SVG scatter plot.

use std::fmt::Write as _;

use crate::graph::KnowledgeGraph;
use crate::pubtator::ConceptCategory;
use crate::tsne::ScatterLayout;

pub const DEFAULT_CYPHER_BATCH: usize = 500;
pub const SVG_SIZE: f64 = 1000.0;
const SVG_MARGIN: f64 = 40.0;

pub fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            // Characters XML 1.0 cannot carry at all.
            c if (c as u32) < 0x20 && !matches!(c, '\t' | '\n' | '\r') => out.push('\u{FFFD}'),
            c => out.push(c),
        }
    }
    out
}

/// GraphML 1.0 document. `comment` (e.g. provenance) is emitted as an XML comment.
pub fn to_graphml(graph: &KnowledgeGraph, comment: Option<&str>) -> String {
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    if let Some(c) = comment {
        let _ = writeln!(out, "<!-- {} -->", c.replace("--", "- -"));
    }
    out.push_str(
        "<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\" \
         xmlns:xsi=\"http://www.w3.org/2001/XMLSchema-instance\" \
         xsi:schemaLocation=\"http://graphml.graphdrawing.org/xmlns \
         http://graphml.graphdrawing.org/xmlns/1.0/graphml.xsd\">\n",
    );
    for (id, target, name, ty) in [
        ("name", "node", "name", "string"),
        ("category", "node", "category", "string"),
        ("doc_frequency", "node", "doc_frequency", "long"),
        ("weight", "edge", "weight", "long"),
        ("relation_class", "edge", "relation_class", "string"),
        ("pmids", "edge", "pmids", "string"),
    ] {
        let _ = writeln!(
            out,
            "  <key id=\"{id}\" for=\"{target}\" attr.name=\"{name}\" attr.type=\"{ty}\"/>"
        );
    }
    out.push_str("  <graph id=\"G\" edgedefault=\"undirected\">\n");
    for node in graph.nodes.values() {
        let _ = writeln!(out, "    <node id=\"{}\">", xml_escape(&node.concept_id));
        let _ = writeln!(out, "      <data key=\"name\">{}</data>", xml_escape(&node.name));
        let _ = writeln!(out, "      <data key=\"category\">{}</data>", xml_escape(node.category.label()));
        let _ = writeln!(out, "      <data key=\"doc_frequency\">{}</data>", node.doc_frequency);
        out.push_str("    </node>\n");
    }
    for (i, edge) in graph.edges.values().enumerate() {
        let _ = writeln!(
            out,
            "    <edge id=\"e{i}\" source=\"{}\" target=\"{}\">",
            xml_escape(&edge.disease_id),
            xml_escape(&edge.other_id)
        );
        let _ = writeln!(out, "      <data key=\"weight\">{}</data>", edge.weight);
        let _ = writeln!(out, "      <data key=\"relation_class\">{}</data>", graph.relation_class(edge));
        let pmids: Vec<&str> = edge.pmids.iter().map(String::as_str).collect();
        let _ = writeln!(out, "      <data key=\"pmids\">{}</data>", xml_escape(&pmids.join("|")));
        out.push_str("    </edge>\n");
    }
    out.push_str("  </graph>\n</graphml>\n");
    out
}

/// Single-quoted Cypher string literal.
pub fn cypher_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('\'');
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\'' => out.push_str("\\'"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('\'');
    out
}

fn category_label(category: ConceptCategory) -> &'static str {
    match category {
        ConceptCategory::SnpMutation => "Mutation",
        c => c.prefix(),
    }
}

/// Cypher script of idempotent MERGE statements, grouped into explicit
/// transactions (`:begin` / `:commit`, as understood by cypher-shell) of at
/// most `batch_size` statements.
pub fn to_cypher(graph: &KnowledgeGraph, batch_size: usize, header: Option<&str>) -> String {
    let batch_size = batch_size.max(1);
    let mut statements = Vec::with_capacity(graph.node_count() + graph.edge_count());
    for node in graph.nodes.values() {
        statements.push(format!(
            "MERGE (n:Concept {{id: {}}}) SET n:{}, n.name = {}, n.category = {}, n.doc_frequency = {};",
            cypher_string(&node.concept_id),
            category_label(node.category),
            cypher_string(&node.name),
            cypher_string(node.category.label()),
            node.doc_frequency
        ));
    }
    for edge in graph.edges.values() {
        let pmids: Vec<String> = edge.pmids.iter().map(|p| cypher_string(p)).collect();
        statements.push(format!(
            "MATCH (a:Concept {{id: {}}}), (b:Concept {{id: {}}}) \
             MERGE (a)-[r:CO_OCCURS]-(b) SET r.weight = {}, r.relation = {}, r.pmids = [{}];",
            cypher_string(&edge.disease_id),
            cypher_string(&edge.other_id),
            edge.weight,
            cypher_string(graph.relation_class(edge).as_str()),
            pmids.join(", ")
        ));
    }
    let mut out = String::new();
    if let Some(h) = header {
        for line in h.lines() {
            let _ = writeln!(out, "// {line}");
        }
    }
    for chunk in statements.chunks(batch_size) {
        out.push_str(":begin\n");
        for s in chunk {
            out.push_str(s);
            out.push('\n');
        }
        out.push_str(":commit\n");
    }
    out
}

/// Edge list as RFC 4180 CSV with header `disease_id,other_id,relation,weight,pmids`.
pub fn export_edges_csv(graph: &KnowledgeGraph) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["disease_id", "other_id", "relation", "weight", "pmids"])
        .expect("in-memory csv write");
    for edge in graph.edges.values() {
        let pmids: Vec<&str> = edge.pmids.iter().map(String::as_str).collect();
        w.write_record([
            edge.disease_id.as_str(),
            edge.other_id.as_str(),
            graph.relation_class(edge).as_str(),
            &edge.weight.to_string(),
            &pmids.join("|"),
        ])
        .expect("in-memory csv write");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv output is utf-8")
}

pub fn category_color(category: ConceptCategory) -> &'static str {
    match category {
        ConceptCategory::Disease => "#d62728",
        ConceptCategory::Chemical => "#1f77b4",
        ConceptCategory::Gene => "#2ca02c",
        ConceptCategory::Species => "#ff7f0e",
        ConceptCategory::SnpMutation => "#9467bd",
    }
}

const UNKNOWN_COLOR: &str = "#7f7f7f";

/// Affine map from layout coordinates into the SVG viewbox. One scale factor
/// for both axes keeps the aspect ratio; the layout is centred.
pub fn svg_transform(coords: &[[f64; 2]]) -> impl Fn([f64; 2]) -> [f64; 2] {
    let (mut min, mut max) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for c in coords {
        for a in 0..2 {
            min[a] = min[a].min(c[a]);
            max[a] = max[a].max(c[a]);
        }
    }
    let span = if coords.is_empty() { 0.0 } else { (max[0] - min[0]).max(max[1] - min[1]) };
    let scale = if span > 0.0 { (SVG_SIZE - 2.0 * SVG_MARGIN) / span } else { 0.0 };
    let centre = if coords.is_empty() {
        [0.0, 0.0]
    } else {
        [(min[0] + max[0]) / 2.0, (min[1] + max[1]) / 2.0]
    };
    move |p: [f64; 2]| {
        [
            SVG_SIZE / 2.0 + (p[0] - centre[0]) * scale,
            // SVG y grows downwards.
            SVG_SIZE / 2.0 - (p[1] - centre[1]) * scale,
        ]
    }
}

pub fn to_scatter_svg(layout: &ScatterLayout, graph: &KnowledgeGraph, comment: Option<&str>) -> String {
    let map = svg_transform(&layout.coords);
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    if let Some(c) = comment {
        let _ = writeln!(out, "<!-- {} -->", c.replace("--", "- -"));
    }
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{s}\" height=\"{s}\" viewBox=\"0 0 {s} {s}\">",
        s = SVG_SIZE
    );
    out.push_str("  <rect x=\"0\" y=\"0\" width=\"1000\" height=\"1000\" fill=\"#ffffff\"/>\n");
    out.push_str("  <g id=\"points\" stroke=\"none\" fill-opacity=\"0.8\">\n");
    let mut order: Vec<usize> = (0..layout.ids.len()).collect();
    order.sort_by(|&a, &b| layout.ids[a].cmp(&layout.ids[b]));
    for i in order {
        let id = &layout.ids[i];
        let [x, y] = map(layout.coords[i]);
        let category = graph
            .nodes
            .get(id)
            .map(|n| n.category)
            .or_else(|| ConceptCategory::from_concept_id(id));
        let color = category.map(category_color).unwrap_or(UNKNOWN_COLOR);
        let _ = writeln!(
            out,
            "    <circle cx=\"{x:.3}\" cy=\"{y:.3}\" r=\"4\" fill=\"{color}\"><title>{}</title></circle>",
            xml_escape(graph.name_of(id))
        );
    }
    out.push_str("  </g>\n  <g id=\"legend\" font-family=\"sans-serif\" font-size=\"14\">\n");
    for (k, category) in ConceptCategory::ALL.iter().enumerate() {
        let y = 20.0 + 20.0 * k as f64;
        let _ = writeln!(
            out,
            "    <circle cx=\"16\" cy=\"{y}\" r=\"6\" fill=\"{}\"/><text x=\"28\" y=\"{}\">{}</text>",
            category_color(*category),
            y + 5.0,
            xml_escape(category.label())
        );
    }
    out.push_str("  </g>\n</svg>\n");
    out
}
