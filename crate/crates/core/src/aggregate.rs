//! Event classes and class-level directly-follows graphs.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::graph_columns;
use crate::model::{
    self, CLASS, COUNT, DF, DF_C, ENTITY_TYPE, ENTITY_UID, EVENT, E_C, E_EN, ID, TYPE,
};
use crate::store::{GraphError, LabeledPropertyGraph, NodeRef, Properties, PropertyValue, RelRef};

#[derive(Debug, Error)]
pub enum AggregateError {
    #[error("unknown column {0}")]
    UnknownColumn(String),
    #[error("no entities of type {0}")]
    UnknownEntityType(String),
    #[error("no classes of type {0}")]
    UnknownClassType(String),
    #[error("classifier {0} has no key columns")]
    EmptyClassifier(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Groups events into classes by the values of `key_columns`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ClassifierRule {
    pub class_type: String,
    pub key_columns: Vec<String>,
    #[serde(default = "plus")]
    pub id_join: String,
}

fn plus() -> String {
    "+".to_owned()
}

impl ClassifierRule {
    pub fn new<S: Into<String>>(
        class_type: &str,
        key_columns: impl IntoIterator<Item = S>,
    ) -> Self {
        Self {
            class_type: class_type.to_owned(),
            key_columns: key_columns.into_iter().map(Into::into).collect(),
            id_join: plus(),
        }
    }

    /// The class ID of an event, or `None` if a key column is missing.
    fn class_id(&self, properties: &Properties) -> Option<String> {
        let parts: Option<Vec<String>> = self
            .key_columns
            .iter()
            .map(|c| properties.get(c).map(PropertyValue::to_plain_string))
            .collect();
        parts.map(|p| p.join(&self.id_join))
    }
}

fn class_index(graph: &LabeledPropertyGraph, class_type: &str) -> HashMap<String, NodeRef> {
    graph
        .nodes_with_label(CLASS)
        .filter(|n| n.text(TYPE) == Some(class_type))
        .filter_map(|n| Some((n.prop(ID)?.to_plain_string(), n.id)))
        .collect()
}

/// One `Class` per distinct key combination. Returns the number created.
pub fn derive_classes(
    graph: &mut LabeledPropertyGraph,
    rule: &ClassifierRule,
) -> Result<usize, AggregateError> {
    if rule.key_columns.is_empty() {
        return Err(AggregateError::EmptyClassifier(rule.class_type.clone()));
    }
    let columns = graph_columns(graph);
    if let Some(missing) = rule.key_columns.iter().find(|c| !columns.contains(*c)) {
        return Err(AggregateError::UnknownColumn(missing.clone()));
    }
    let mut known = class_index(graph, &rule.class_type);
    let mut fresh: Vec<(String, Properties)> = Vec::new();
    for event in graph.nodes_with_label(EVENT) {
        let Some(id) = rule.class_id(&event.properties) else {
            continue;
        };
        if known.contains_key(&id) || fresh.iter().any(|(f, _)| *f == id) {
            continue;
        }
        let mut properties = Properties::new();
        for column in &rule.key_columns {
            if column != TYPE && column != ID {
                properties.insert(column.clone(), event.properties[column].clone());
            }
        }
        properties.insert(
            TYPE.to_owned(),
            PropertyValue::from(rule.class_type.as_str()),
        );
        properties.insert(ID.to_owned(), PropertyValue::Text(id.clone()));
        fresh.push((id, properties));
    }
    let created = fresh.len();
    for (id, properties) in fresh {
        let node = graph.add_node([CLASS], properties)?;
        known.insert(id, node);
    }
    Ok(created)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LinkOutcome {
    pub created: usize,
    /// Events lacking a key column or a matching class.
    pub skipped: usize,
}

/// `E_C` from every event to its class of `rule.class_type`.
pub fn link_event_classes(
    graph: &mut LabeledPropertyGraph,
    rule: &ClassifierRule,
) -> Result<LinkOutcome, AggregateError> {
    let classes = class_index(graph, &rule.class_type);
    let mut outcome = LinkOutcome::default();
    let mut links = Vec::new();
    for event in graph.nodes_with_label(EVENT) {
        let Some(class) = rule
            .class_id(&event.properties)
            .and_then(|id| classes.get(&id))
        else {
            outcome.skipped += 1;
            continue;
        };
        if !graph
            .out_rels(event.id, Some(E_C))
            .any(|r| r.target == *class)
        {
            links.push((event.id, *class));
        }
    }
    for (event, class) in links {
        graph.add_relationship(event, class, E_C, Properties::new())?;
        outcome.created += 1;
    }
    Ok(outcome)
}

fn class_of(graph: &LabeledPropertyGraph, event: NodeRef, class_type: &str) -> Option<NodeRef> {
    graph
        .out_rels(event, Some(E_C))
        .map(|r| r.target)
        .filter(|c| {
            graph
                .node(*c)
                .is_ok_and(|n| n.text(TYPE) == Some(class_type))
        })
        .min()
}

fn shares_entity(
    graph: &LabeledPropertyGraph,
    source: NodeRef,
    target: NodeRef,
    entity_type: &str,
) -> bool {
    graph
        .out_rels(source, Some(E_EN))
        .filter(|r| {
            graph
                .node(r.target)
                .is_ok_and(|n| n.text(ENTITY_TYPE) == Some(entity_type))
        })
        .any(|r| model::is_correlated(graph, target, r.target))
}

/// `DF` edges of `entity_type` whose endpoints are correlated to a common
/// entity of that type: the owning entity when the edge names one.
fn witnessed_df(
    graph: &LabeledPropertyGraph,
    entity_type: &str,
) -> Vec<(RelRef, NodeRef, NodeRef)> {
    graph
        .relationships_of_type(DF)
        .filter(|r| r.text(ENTITY_TYPE) == Some(entity_type))
        .filter(|r| match r.text(ENTITY_UID) {
            Some(uid) => model::entity_by_uid(graph, uid)
                .and_then(|e| graph.node(e).ok())
                .is_some_and(|e| model::df_belongs_to(graph, r, e, entity_type)),
            None => shares_entity(graph, r.source, r.target, entity_type),
        })
        .map(|r| (r.id, r.source, r.target))
        .collect()
}

/// Rebuilds the `DF_C` edges of `(class_type, entity_type)`. Returns the
/// number of edges created.
pub fn aggregate_df(
    graph: &mut LabeledPropertyGraph,
    class_type: &str,
    entity_type: &str,
) -> Result<usize, AggregateError> {
    if model::entities_of_type(graph, entity_type).next().is_none() {
        return Err(AggregateError::UnknownEntityType(entity_type.to_owned()));
    }
    if !graph
        .nodes_with_label(CLASS)
        .any(|n| n.text(TYPE) == Some(class_type))
    {
        return Err(AggregateError::UnknownClassType(class_type.to_owned()));
    }
    let mut counts: BTreeMap<(NodeRef, NodeRef), i64> = BTreeMap::new();
    for (_, source, target) in witnessed_df(graph, entity_type) {
        if let (Some(c1), Some(c2)) = (
            class_of(graph, source, class_type),
            class_of(graph, target, class_type),
        ) {
            *counts.entry((c1, c2)).or_default() += 1;
        }
    }
    let stale: Vec<RelRef> = graph
        .relationships_of_type(DF_C)
        .filter(|r| r.text(ENTITY_TYPE) == Some(entity_type))
        .filter(|r| {
            graph
                .node(r.source)
                .is_ok_and(|n| n.text(TYPE) == Some(class_type))
        })
        .map(|r| r.id)
        .collect();
    for r in stale {
        graph.remove_relationship(r)?;
    }
    let created = counts.len();
    for ((c1, c2), count) in counts {
        let mut properties = Properties::new();
        properties.insert(ENTITY_TYPE.to_owned(), PropertyValue::from(entity_type));
        properties.insert(COUNT.to_owned(), PropertyValue::Int(count));
        graph.add_relationship(c1, c2, DF_C, properties)?;
    }
    Ok(created)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AggregatedClass {
    pub node: NodeRef,
    pub id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AggregatedEdge {
    pub rel: RelRef,
    pub source: NodeRef,
    pub target: NodeRef,
    pub source_id: String,
    pub target_id: String,
    pub entity_type: String,
    pub count: i64,
}

/// Classes of one type and the `DF_C` edges among them. Only classes
/// incident to an edge are included.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct AggregatedGraph {
    pub class_type: String,
    pub classes: Vec<AggregatedClass>,
    pub edges: Vec<AggregatedEdge>,
}

impl AggregatedGraph {
    /// Reads the current `DF_C` edges of `class_type` restricted to
    /// `entity_types`.
    pub fn from_graph(
        graph: &LabeledPropertyGraph,
        class_type: &str,
        entity_types: &[&str],
    ) -> Self {
        let class_id = |n: NodeRef| -> Option<String> {
            let node = graph.node(n).ok()?;
            (node.text(TYPE) == Some(class_type)).then(|| {
                node.prop(ID)
                    .map(PropertyValue::to_plain_string)
                    .unwrap_or_default()
            })
        };
        let mut edges = Vec::new();
        for rel in graph.relationships_of_type(DF_C) {
            let Some(entity_type) = rel.text(ENTITY_TYPE) else {
                continue;
            };
            if !entity_types.contains(&entity_type) {
                continue;
            }
            let (Some(source_id), Some(target_id)) = (class_id(rel.source), class_id(rel.target))
            else {
                continue;
            };
            edges.push(AggregatedEdge {
                rel: rel.id,
                source: rel.source,
                target: rel.target,
                source_id,
                target_id,
                entity_type: entity_type.to_owned(),
                count: rel.prop(COUNT).and_then(PropertyValue::as_int).unwrap_or(0),
            });
        }
        Self::assemble(class_type, edges)
    }

    fn assemble(class_type: &str, mut edges: Vec<AggregatedEdge>) -> Self {
        edges.sort_by(|a, b| {
            (&a.entity_type, &a.source_id, &a.target_id, a.rel).cmp(&(
                &b.entity_type,
                &b.source_id,
                &b.target_id,
                b.rel,
            ))
        });
        let classes: BTreeSet<(String, NodeRef)> = edges
            .iter()
            .flat_map(|e| {
                [
                    (e.source_id.clone(), e.source),
                    (e.target_id.clone(), e.target),
                ]
            })
            .collect();
        Self {
            class_type: class_type.to_owned(),
            classes: classes
                .into_iter()
                .map(|(id, node)| AggregatedClass { node, id })
                .collect(),
            edges,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn total_count(&self) -> i64 {
        self.edges.iter().map(|e| e.count).sum()
    }

    /// `sourceClassID,targetClassID,entityType,count` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["sourceClassID", "targetClassID", "entityType", "count"])
            .expect("writing to memory");
        for e in &self.edges {
            w.write_record([
                &e.source_id,
                &e.target_id,
                &e.entity_type,
                &e.count.to_string(),
            ])
            .expect("writing to memory");
        }
        String::from_utf8(w.into_inner().expect("writing to memory")).expect("csv output is utf-8")
    }

    /// One `source -> target [type] count` line per edge.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.edges {
            let _ = writeln!(
                out,
                "{} -> {} [{}] {}",
                e.source_id, e.target_id, e.entity_type, e.count
            );
        }
        out
    }
}

/// Keeps edges with `count >= min_count` and the classes they touch.
pub fn filter_by_count(aggregated: &AggregatedGraph, min_count: i64) -> AggregatedGraph {
    let kept = aggregated
        .edges
        .iter()
        .filter(|e| e.count >= min_count)
        .cloned()
        .collect();
    AggregatedGraph::assemble(&aggregated.class_type, kept)
}

/// Resource handovers within cases of `case_entity_type`.
pub fn handover_network(
    graph: &mut LabeledPropertyGraph,
    case_entity_type: &str,
) -> Result<AggregatedGraph, AggregateError> {
    aggregate_df(graph, "Resource", case_entity_type)?;
    Ok(AggregatedGraph::from_graph(
        graph,
        "Resource",
        &[case_entity_type],
    ))
}

/// Union of the aggregations of `class_type` over several entity types;
/// each edge keeps its entity type.
pub fn entity_centric_dfg(
    graph: &mut LabeledPropertyGraph,
    class_type: &str,
    entity_types: &[&str],
) -> Result<AggregatedGraph, AggregateError> {
    for t in entity_types {
        aggregate_df(graph, class_type, t)?;
    }
    Ok(AggregatedGraph::from_graph(graph, class_type, entity_types))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{self, DerivationConfig};

    const FIXTURE: &str = include_str!("../fixtures/bpic17_sample.csv");
    const CONFIG: &str = include_str!("../fixtures/bpic17_sample.json");

    fn derived() -> LabeledPropertyGraph {
        let cfg = DerivationConfig::from_json(CONFIG).unwrap();
        let table =
            ingest::read_event_table(FIXTURE.as_bytes(), &cfg.import_config().unwrap()).unwrap();
        let mut g = LabeledPropertyGraph::new();
        ingest::import_events(&mut g, &table).unwrap();
        ingest::create_logs(&mut g, &cfg.default_log_id).unwrap();
        for r in &cfg.entities {
            ingest::derive_entities(&mut g, r).unwrap();
            ingest::correlate_events(&mut g, r).unwrap();
        }
        for r in &cfg.reifications {
            ingest::reify_relation(&mut g, r).unwrap();
            ingest::correlate_composite(&mut g, &r.composite_type, &r.type1).unwrap();
            ingest::correlate_composite(&mut g, &r.composite_type, &r.type2).unwrap();
        }
        for t in [
            "Application",
            "Workflow",
            "Offer",
            "Resource",
            "Case_AO",
            "Case",
        ] {
            ingest::derive_df(&mut g, t, true).unwrap();
        }
        for c in &cfg.classifiers {
            derive_classes(&mut g, c).unwrap();
            link_event_classes(&mut g, c).unwrap();
        }
        g
    }

    fn pairs(a: &AggregatedGraph) -> Vec<(String, String, i64)> {
        a.edges
            .iter()
            .map(|e| (e.source_id.clone(), e.target_id.clone(), e.count))
            .collect()
    }

    fn p(a: &str, b: &str, c: i64) -> (String, String, i64) {
        (a.to_owned(), b.to_owned(), c)
    }

    #[test]
    fn classes_and_links() {
        let mut g = derived();
        assert_eq!(
            g.nodes_with_label(CLASS)
                .filter(|n| n.text(TYPE) == Some("Activity"))
                .count(),
            8
        );
        assert_eq!(
            g.nodes_with_label(CLASS)
                .filter(|n| n.text(TYPE) == Some("Resource"))
                .count(),
            7
        );
        let activity = ClassifierRule::new("Activity", ["Activity"]);
        assert_eq!(derive_classes(&mut g, &activity).unwrap(), 0);
        assert_eq!(
            link_event_classes(&mut g, &activity).unwrap(),
            LinkOutcome::default()
        );
        assert_eq!(g.count_type(E_C), 20);
        let send = class_index(&g, "Activity")["Send Offer"];
        let mut members: Vec<_> = g.in_rels(send, Some(E_C)).map(|r| r.source.0 + 1).collect();
        members.sort();
        assert_eq!(members, vec![6, 7]);
        assert!(matches!(
            derive_classes(&mut g, &ClassifierRule::new("X", ["Nope"])),
            Err(AggregateError::UnknownColumn(_))
        ));
    }

    #[test]
    fn missing_key_is_skipped() {
        let mut g = LabeledPropertyGraph::new();
        let table = ingest::read_event_table(
            "Activity,Timestamp,Resource\na,2020-01-01T00:00:00,r1\nb,2020-01-01T00:01:00,\n"
                .as_bytes(),
            &Default::default(),
        )
        .unwrap();
        ingest::import_events(&mut g, &table).unwrap();
        let rule = ClassifierRule::new("Resource", ["Resource"]);
        assert_eq!(derive_classes(&mut g, &rule).unwrap(), 1);
        assert_eq!(
            link_event_classes(&mut g, &rule).unwrap(),
            LinkOutcome {
                created: 1,
                skipped: 1
            }
        );
    }

    #[test]
    fn composite_class_ids_join_with_plus() {
        let mut g = derived();
        let rule = ClassifierRule::new("Activity+Resource", ["Activity", "Resource"]);
        assert_eq!(derive_classes(&mut g, &rule).unwrap(), 8);
        assert!(class_index(&g, "Activity+Resource").contains_key("Send Offer+12"));
    }

    #[test]
    fn offer_and_workflow_aggregates() {
        let mut g = derived();
        assert_eq!(aggregate_df(&mut g, "Activity", "Offer").unwrap(), 2);
        let offer = AggregatedGraph::from_graph(&g, "Activity", &["Offer"]);
        assert_eq!(
            pairs(&offer),
            vec![
                p("Create Offer", "Send Offer", 2),
                p("Send Offer", "Offer Returned", 1)
            ]
        );
        assert_eq!(offer.classes.len(), 3);
        assert_eq!(
            pairs(&filter_by_count(&offer, 2)),
            vec![p("Create Offer", "Send Offer", 2)]
        );
        assert_eq!(filter_by_count(&offer, 1), offer);
        assert!(filter_by_count(&offer, 1_000_000_000).classes.is_empty());

        aggregate_df(&mut g, "Activity", "Workflow").unwrap();
        let wf = AggregatedGraph::from_graph(&g, "Activity", &["Workflow"]);
        assert_eq!(pairs(&wf), vec![p("Handle Leads", "Call Offers", 1)]);

        assert_eq!(aggregate_df(&mut g, "Activity", "Offer").unwrap(), 2);
        assert_eq!(g.count_type(DF_C), 3);
        assert!(matches!(
            aggregate_df(&mut g, "Activity", "Nope"),
            Err(AggregateError::UnknownEntityType(_))
        ));
        assert!(matches!(
            aggregate_df(&mut g, "Nope", "Offer"),
            Err(AggregateError::UnknownClassType(_))
        ));
    }

    #[test]
    fn handover_network_of_cases() {
        let mut g = derived();
        let net = handover_network(&mut g, "Case").unwrap();
        let mut got = pairs(&net);
        got.sort();
        let mut want: Vec<_> = [
            ("9", "10"),
            ("10", "42"),
            ("42", "11"),
            ("11", "11"),
            ("11", "12"),
            ("12", "12"),
            ("12", "44"),
            ("44", "16"),
            ("16", "44"),
        ]
        .iter()
        .map(|(a, b)| p(a, b, 1))
        .collect();
        want.sort();
        assert_eq!(got, want);
        assert_eq!(net.classes.len(), 7);
        assert_eq!(net.total_count(), 9);
        assert!(net
            .to_csv()
            .starts_with("sourceClassID,targetClassID,entityType,count\n"));
    }

    #[test]
    fn entity_centric_union() {
        let mut g = derived();
        let dfg = entity_centric_dfg(
            &mut g,
            "Activity",
            &["Application", "Workflow", "Offer", "Case_AO"],
        )
        .unwrap();
        let per_type = |t: &str| dfg.edges.iter().filter(|e| e.entity_type == t).count();
        assert_eq!(per_type("Application"), 2);
        assert_eq!(per_type("Workflow"), 1);
        assert_eq!(per_type("Offer"), 2);
        assert_eq!(per_type("Case_AO"), 6);
        assert_eq!(dfg.classes.len(), 8);
        assert!(entity_centric_dfg(&mut g, "Activity", &[])
            .unwrap()
            .is_empty());
    }
}
