use std::collections::BTreeMap;
use std::fmt::Write as _;

use quick_xml::escape::escape;

use crate::store::{LabeledPropertyGraph, Properties, ValueKind};

use super::{resolve, ExportError, ExportSelection};

const NODE_LABELS_KEY: &str = "labels";
const EDGE_TYPE_KEY: &str = "label";

#[derive(Clone, Copy, PartialEq, Eq)]
enum Domain {
    Node,
    Edge,
}

impl Domain {
    fn as_str(self) -> &'static str {
        match self {
            Domain::Node => "node",
            Domain::Edge => "edge",
        }
    }
}

struct Key {
    id: String,
    domain: Domain,
    name: String,
    attr_type: &'static str,
}

fn attr_type(kinds: &[ValueKind]) -> &'static str {
    match kinds {
        [ValueKind::Int] => "long",
        [ValueKind::Float] => "double",
        [ValueKind::Bool] => "boolean",
        _ => "string",
    }
}

fn collect_keys<'a>(
    props: impl Iterator<Item = &'a Properties>,
) -> BTreeMap<String, Vec<ValueKind>> {
    let mut kinds: BTreeMap<String, Vec<ValueKind>> = BTreeMap::new();
    for p in props {
        for (k, v) in p {
            let entry = kinds.entry(k.clone()).or_default();
            if !entry.contains(&v.kind()) {
                entry.push(v.kind());
            }
        }
    }
    kinds
}

/// GraphML 1.0 document for the selection. Every property used by a
/// selected element is declared as a key; timestamps are ISO-8601 text.
pub fn to_graphml(
    graph: &LabeledPropertyGraph,
    selection: &ExportSelection,
) -> Result<String, ExportError> {
    let sub = resolve(graph, selection)?;
    let nodes = sub
        .nodes
        .iter()
        .map(|n| graph.node(*n))
        .collect::<Result<Vec<_>, _>>()?;
    let rels = sub
        .rels
        .iter()
        .map(|r| graph.relationship(*r))
        .collect::<Result<Vec<_>, _>>()?;

    let node_keys = collect_keys(nodes.iter().map(|n| &n.properties));
    let edge_keys = collect_keys(rels.iter().map(|r| &r.properties));
    let mut keys = vec![Key {
        id: NODE_LABELS_KEY.to_owned(),
        domain: Domain::Node,
        name: NODE_LABELS_KEY.to_owned(),
        attr_type: "string",
    }];
    for (i, (name, kinds)) in node_keys.iter().enumerate() {
        keys.push(Key {
            id: format!("n{i}"),
            domain: Domain::Node,
            name: name.clone(),
            attr_type: attr_type(kinds),
        });
    }
    keys.push(Key {
        id: EDGE_TYPE_KEY.to_owned(),
        domain: Domain::Edge,
        name: EDGE_TYPE_KEY.to_owned(),
        attr_type: "string",
    });
    for (i, (name, kinds)) in edge_keys.iter().enumerate() {
        keys.push(Key {
            id: format!("e{i}"),
            domain: Domain::Edge,
            name: name.clone(),
            attr_type: attr_type(kinds),
        });
    }
    let node_id: BTreeMap<&str, usize> = node_keys
        .keys()
        .enumerate()
        .map(|(i, k)| (k.as_str(), i))
        .collect();
    let edge_id: BTreeMap<&str, usize> = edge_keys
        .keys()
        .enumerate()
        .map(|(i, k)| (k.as_str(), i))
        .collect();

    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str(
        "<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\" \
         xmlns:xsi=\"http://www.w3.org/2001/XMLSchema-instance\" \
         xsi:schemaLocation=\"http://graphml.graphdrawing.org/xmlns \
         http://graphml.graphdrawing.org/xmlns/1.0/graphml.xsd\">\n",
    );
    for k in &keys {
        let _ = writeln!(
            out,
            "  <key id=\"{}\" for=\"{}\" attr.name=\"{}\" attr.type=\"{}\"/>",
            k.id,
            k.domain.as_str(),
            escape(&k.name),
            k.attr_type
        );
    }
    out.push_str("  <graph id=\"G\" edgedefault=\"directed\">\n");
    for node in &nodes {
        let _ = writeln!(out, "    <node id=\"{}\">", node.id);
        let labels: String = node.labels.iter().map(|l| format!(":{l}")).collect();
        let _ = writeln!(
            out,
            "      <data key=\"{NODE_LABELS_KEY}\">{}</data>",
            escape(&labels)
        );
        for (k, v) in &node.properties {
            let _ = writeln!(
                out,
                "      <data key=\"n{}\">{}</data>",
                node_id[k.as_str()],
                escape(&v.to_plain_string())
            );
        }
        out.push_str("    </node>\n");
    }
    for rel in &rels {
        let _ = writeln!(
            out,
            "    <edge id=\"{}\" source=\"{}\" target=\"{}\">",
            rel.id, rel.source, rel.target
        );
        let _ = writeln!(
            out,
            "      <data key=\"{EDGE_TYPE_KEY}\">{}</data>",
            escape(&rel.rel_type)
        );
        for (k, v) in &rel.properties {
            let _ = writeln!(
                out,
                "      <data key=\"e{}\">{}</data>",
                edge_id[k.as_str()],
                escape(&v.to_plain_string())
            );
        }
        out.push_str("    </edge>\n");
    }
    out.push_str("  </graph>\n</graphml>\n");
    Ok(out)
}
