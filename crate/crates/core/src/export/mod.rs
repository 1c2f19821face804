//! DOT and GraphML renderings of a selected part of the graph.

mod dot;
mod graphml;

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::aggregate::{filter_by_count, AggregatedGraph};
use crate::model::{self, CLASS, DF, ENTITY_TYPE, E_EN, TYPE};
use crate::store::{GraphError, LabeledPropertyGraph, NodeRef, RelRef};

pub use dot::to_dot;
pub use graphml::to_graphml;

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("unknown selection: {0}")]
    UnknownSelection(String),
    #[error("invalid selection `{0}`")]
    InvalidSelection(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Which part of the graph to render.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Scope {
    #[default]
    Full,
    /// One entity, its events, and the DF edges of its own history.
    Entity(String),
    /// All entities of the given types with their events and DF edges.
    EntityType(Vec<String>),
    /// Class nodes and DF_C edges of one class type.
    Aggregated {
        class_type: String,
        entity_types: Vec<String>,
        min_count: i64,
    },
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scope::Full => f.write_str("full"),
            Scope::Entity(uid) => write!(f, "entity={uid}"),
            Scope::EntityType(types) => write!(f, "entityType={}", types.join(",")),
            Scope::Aggregated {
                class_type,
                entity_types,
                min_count,
            } => write!(
                f,
                "aggregated={class_type}:{}:{min_count}",
                entity_types.join(",")
            ),
        }
    }
}

/// Accepts `full`, `entity=UID`, `entityType=T1,T2` and
/// `aggregated=CLASS:T1,T2[:MIN]`.
impl FromStr for Scope {
    type Err = ExportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ExportError::InvalidSelection(s.to_owned());
        let list = |v: &str| -> Vec<String> {
            v.split(',')
                .map(str::trim)
                .filter(|t| !t.is_empty())
                .map(str::to_owned)
                .collect()
        };
        if s == "full" {
            return Ok(Scope::Full);
        }
        let (kind, value) = s.split_once('=').ok_or_else(bad)?;
        match kind {
            "entity" if !value.is_empty() => Ok(Scope::Entity(value.to_owned())),
            "entityType" => {
                let types = list(value);
                if types.is_empty() {
                    return Err(bad());
                }
                Ok(Scope::EntityType(types))
            }
            "aggregated" => {
                let mut parts = value.split(':');
                let class_type = parts.next().filter(|c| !c.is_empty()).ok_or_else(bad)?;
                let entity_types = list(parts.next().ok_or_else(bad)?);
                let min_count = match parts.next() {
                    Some(m) => m.parse::<i64>().ok().filter(|m| *m >= 1).ok_or_else(bad)?,
                    None => 1,
                };
                if parts.next().is_some() {
                    return Err(bad());
                }
                Ok(Scope::Aggregated {
                    class_type: class_type.to_owned(),
                    entity_types,
                    min_count,
                })
            }
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ExportSelection {
    pub scope: Scope,
    /// Keep only nodes carrying one of these labels; `None` keeps all.
    pub include_node_kinds: Option<BTreeSet<String>>,
    /// Keep only relationships of these types; `None` keeps all.
    pub include_rel_types: Option<BTreeSet<String>>,
}

impl ExportSelection {
    pub fn new(scope: Scope) -> Self {
        Self {
            scope,
            ..Self::default()
        }
    }

    pub fn node_kinds<S: Into<String>>(mut self, kinds: impl IntoIterator<Item = S>) -> Self {
        self.include_node_kinds = Some(kinds.into_iter().map(Into::into).collect());
        self
    }

    pub fn rel_types<S: Into<String>>(mut self, types: impl IntoIterator<Item = S>) -> Self {
        self.include_rel_types = Some(types.into_iter().map(Into::into).collect());
        self
    }
}

/// The nodes and relationships a selection resolves to. Every kept
/// relationship has both endpoints in `nodes`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Subgraph {
    pub nodes: BTreeSet<NodeRef>,
    pub rels: BTreeSet<RelRef>,
}

impl Subgraph {
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

fn entity_scope(
    graph: &LabeledPropertyGraph,
    entities: &[NodeRef],
    types: Option<&[String]>,
) -> Subgraph {
    let mut sub = Subgraph::default();
    for &entity in entities {
        sub.nodes.insert(entity);
        let uid = graph.node(entity).ok().and_then(|n| n.text(model::UID));
        for rel in graph.in_rels(entity, Some(E_EN)) {
            sub.nodes.insert(rel.source);
            sub.rels.insert(rel.id);
        }
        for event in model::correlated_events(graph, entity) {
            for rel in graph.out_rels(event, Some(DF)) {
                let keep = match types {
                    Some(ts) => rel
                        .text(ENTITY_TYPE)
                        .is_some_and(|t| ts.iter().any(|x| x == t)),
                    None => rel.text(model::ENTITY_UID) == uid,
                };
                if keep && model::is_correlated(graph, rel.target, entity) {
                    sub.rels.insert(rel.id);
                }
            }
        }
    }
    sub
}

/// Resolves `selection` against `graph`.
pub fn resolve(
    graph: &LabeledPropertyGraph,
    selection: &ExportSelection,
) -> Result<Subgraph, ExportError> {
    let mut sub = match &selection.scope {
        Scope::Full => Subgraph {
            nodes: graph.nodes().map(|n| n.id).collect(),
            rels: graph.relationships().map(|r| r.id).collect(),
        },
        Scope::Entity(uid) => {
            let entity = model::entity_by_uid(graph, uid)
                .ok_or_else(|| ExportError::UnknownSelection(format!("entity {uid}")))?;
            entity_scope(graph, &[entity], None)
        }
        Scope::EntityType(types) => {
            let mut entities = Vec::new();
            for t in types {
                let of_type: Vec<NodeRef> =
                    model::entities_of_type(graph, t).map(|n| n.id).collect();
                if of_type.is_empty() {
                    return Err(ExportError::UnknownSelection(format!("entity type {t}")));
                }
                entities.extend(of_type);
            }
            entity_scope(graph, &entities, Some(types))
        }
        Scope::Aggregated {
            class_type,
            entity_types,
            min_count,
        } => {
            if !graph
                .nodes_with_label(CLASS)
                .any(|n| n.text(TYPE) == Some(class_type.as_str()))
            {
                return Err(ExportError::UnknownSelection(format!(
                    "class type {class_type}"
                )));
            }
            for t in entity_types {
                if model::entities_of_type(graph, t).next().is_none() {
                    return Err(ExportError::UnknownSelection(format!("entity type {t}")));
                }
            }
            let types: Vec<&str> = entity_types.iter().map(String::as_str).collect();
            let agg = filter_by_count(
                &AggregatedGraph::from_graph(graph, class_type, &types),
                *min_count,
            );
            Subgraph {
                nodes: agg.classes.iter().map(|c| c.node).collect(),
                rels: agg.edges.iter().map(|e| e.rel).collect(),
            }
        }
    };
    if let Some(kinds) = &selection.include_node_kinds {
        sub.nodes.retain(|n| {
            graph
                .node(*n)
                .is_ok_and(|node| node.labels.iter().any(|l| kinds.contains(l)))
        });
    }
    let mut rels = BTreeSet::new();
    for r in &sub.rels {
        let rel = graph.relationship(*r)?;
        let type_ok = selection
            .include_rel_types
            .as_ref()
            .is_none_or(|t| t.contains(&rel.rel_type));
        if type_ok && sub.nodes.contains(&rel.source) && sub.nodes.contains(&rel.target) {
            rels.insert(*r);
        }
    }
    sub.rels = rels;
    Ok(sub)
}

pub fn export_dot(
    graph: &LabeledPropertyGraph,
    selection: &ExportSelection,
    path: &Path,
) -> Result<(), ExportError> {
    let text = to_dot(graph, selection)?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn export_graphml(
    graph: &LabeledPropertyGraph,
    selection: &ExportSelection,
    path: &Path,
) -> Result<(), ExportError> {
    let text = to_graphml(graph, selection)?;
    std::fs::write(path, text)?;
    Ok(())
}
