use std::fmt::Write as _;

use crate::model::{
    ACTIVITY, CLASS, COUNT, DF, DF_C, ENTITY, ENTITY_TYPE, EVENT, ID, LOG, TIMESTAMP, TYPE, UID,
};
use crate::store::{LabeledPropertyGraph, Node, Relationship};

use super::{resolve, ExportError, ExportSelection};

fn quoted(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => {}
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn text(node: &Node, key: &str) -> String {
    node.prop(key)
        .map(|v| v.to_plain_string())
        .unwrap_or_default()
}

fn node_style(node: &Node) -> (&'static str, String) {
    if node.has_label(EVENT) {
        (
            "box",
            format!("{}\n{}", text(node, ACTIVITY), text(node, TIMESTAMP)),
        )
    } else if node.has_label(ENTITY) {
        ("ellipse", text(node, UID))
    } else if node.has_label(CLASS) {
        (
            "hexagon",
            format!("{}\n{}", text(node, TYPE), text(node, ID)),
        )
    } else if node.has_label(LOG) {
        ("note", text(node, ID))
    } else {
        let labels: Vec<&str> = node.labels.iter().map(String::as_str).collect();
        ("plaintext", labels.join(":"))
    }
}

fn edge_attrs(rel: &Relationship) -> String {
    let et = rel
        .prop(ENTITY_TYPE)
        .map(|v| v.to_plain_string())
        .unwrap_or_default();
    match rel.rel_type.as_str() {
        DF => format!("label={}", quoted(&et)),
        DF_C => {
            let count = rel
                .prop(COUNT)
                .map(|v| v.to_plain_string())
                .unwrap_or_default();
            format!("label={}, penwidth=2", quoted(&format!("{et} {count}")))
        }
        other => format!("label={}, style=dashed, color=gray50", quoted(other)),
    }
}

/// Graphviz text for the selection; nodes and edges in reference order.
pub fn to_dot(
    graph: &LabeledPropertyGraph,
    selection: &ExportSelection,
) -> Result<String, ExportError> {
    let sub = resolve(graph, selection)?;
    let mut out = String::from("digraph ekg {\n");
    if !sub.is_empty() {
        out.push_str(
            "  rankdir=LR;\n  node [fontname=\"Helvetica\"];\n  edge [fontname=\"Helvetica\"];\n",
        );
    }
    for n in &sub.nodes {
        let node = graph.node(*n)?;
        let (shape, label) = node_style(node);
        let _ = writeln!(out, "  {n} [shape={shape}, label={}];", quoted(&label));
    }
    for r in &sub.rels {
        let rel = graph.relationship(*r)?;
        let _ = writeln!(
            out,
            "  {} -> {} [{}];",
            rel.source,
            rel.target,
            edge_attrs(rel)
        );
    }
    out.push_str("}\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregate;
    use crate::export::Scope;
    use crate::testutil::derived;

    #[test]
    fn single_entity_history() {
        let g = derived();
        let sel = ExportSelection::new(Scope::Entity("Offer2".into())).rel_types([DF]);
        let dot = to_dot(&g, &sel).unwrap();
        assert_eq!(dot.matches("shape=box").count(), 3);
        assert_eq!(dot.matches(" -> ").count(), 2);
        assert!(dot.contains("label=\"Offer\""));
        assert_eq!(dot, to_dot(&g, &sel).unwrap());
    }

    #[test]
    fn empty_selection_is_valid() {
        let g = LabeledPropertyGraph::new();
        assert_eq!(
            to_dot(&g, &ExportSelection::default()).unwrap(),
            "digraph ekg {\n}\n"
        );
        let g = derived();
        let none = ExportSelection::default().node_kinds(Vec::<String>::new());
        assert_eq!(to_dot(&g, &none).unwrap(), "digraph ekg {\n}\n");
    }

    #[test]
    fn aggregated_counts() {
        let mut g = derived();
        aggregate::aggregate_df(&mut g, "Activity", "Offer").unwrap();
        let sel = ExportSelection::new(Scope::Aggregated {
            class_type: "Activity".into(),
            entity_types: vec!["Offer".into()],
            min_count: 1,
        });
        let dot = to_dot(&g, &sel).unwrap();
        assert_eq!(dot.matches("shape=hexagon").count(), 3);
        assert_eq!(dot.matches(" -> ").count(), 2);
        assert!(dot.contains("label=\"Offer 2\""));
        assert!(dot.contains("label=\"Offer 1\""));
    }

    #[test]
    fn unknown_entity_is_rejected() {
        let g = derived();
        let sel = ExportSelection::new(Scope::Entity("Offer99".into()));
        assert!(matches!(
            to_dot(&g, &sel),
            Err(ExportError::UnknownSelection(_))
        ));
    }

    #[test]
    fn labels_are_escaped() {
        assert_eq!(quoted("a\"b\\c\nd"), "\"a\\\"b\\\\c\\nd\"");
    }
}
