//! Semantic vocabulary of an event graph: the node labels, relationship
//! types, and property keys every module agrees on.

use crate::store::{LabeledPropertyGraph, Node, NodeRef, PropertyValue, Relationship};

pub const EVENT: &str = "Event";
pub const ENTITY: &str = "Entity";
pub const LOG: &str = "Log";
pub const CLASS: &str = "Class";

pub const E_EN: &str = "E_EN";
pub const L_E: &str = "L_E";
pub const DF: &str = "DF";
pub const E_C: &str = "E_C";
pub const DF_C: &str = "DF_C";

pub const NODE_LABELS: [&str; 4] = [EVENT, ENTITY, LOG, CLASS];
pub const REL_TYPES: [&str; 5] = [E_EN, L_E, DF, E_C, DF_C];

pub const ACTIVITY: &str = "Activity";
pub const TIMESTAMP: &str = "Timestamp";
pub const LOG_ID: &str = "LogID";
pub const ID: &str = "ID";
pub const UID: &str = "uID";
pub const ENTITY_TYPE: &str = "EntityType";
/// Set on derived `DF` edges: the uID of the entity whose history the edge
/// belongs to. Two entities of one type sharing a consecutive event pair get
/// one edge each.
pub const ENTITY_UID: &str = "EntityUID";
pub const TYPE: &str = "Type";
pub const COUNT: &str = "count";

/// Graph attribute holding the imported column header.
pub const COLUMNS_ATTR: &str = "ekg.columns";

pub fn is_node_label(s: &str) -> bool {
    NODE_LABELS.contains(&s)
}

pub fn is_rel_type(s: &str) -> bool {
    REL_TYPES.contains(&s)
}

/// The single total order on events: timestamp first, creation order second.
pub type OrderKey = (i64, NodeRef);

pub fn order_key(node: &Node) -> Option<OrderKey> {
    node.prop(TIMESTAMP)
        .and_then(PropertyValue::as_timestamp)
        .map(|ts| (ts, node.id))
}

/// Entities of one type, in creation order.
pub fn entities_of_type<'a>(
    graph: &'a LabeledPropertyGraph,
    entity_type: &'a str,
) -> impl Iterator<Item = &'a Node> + 'a {
    graph
        .nodes_with_label(ENTITY)
        .filter(move |n| n.text(ENTITY_TYPE) == Some(entity_type))
}

pub fn entity_by_uid(graph: &LabeledPropertyGraph, uid: &str) -> Option<NodeRef> {
    graph
        .find_one(ENTITY, UID, &PropertyValue::from(uid))
        .filter(|n| graph.node(*n).is_ok_and(|n| n.has_label(ENTITY)))
}

/// Events correlated to `entity` through `E_EN`, in creation order.
pub fn correlated_events(graph: &LabeledPropertyGraph, entity: NodeRef) -> Vec<NodeRef> {
    let mut events: Vec<NodeRef> = graph
        .in_rels(entity, Some(E_EN))
        .map(|r| r.source)
        .collect();
    events.sort();
    events.dedup();
    events
}

pub fn is_correlated(graph: &LabeledPropertyGraph, event: NodeRef, entity: NodeRef) -> bool {
    graph
        .out_rels(event, Some(E_EN))
        .any(|r| r.target == entity)
}

/// Whether a `DF` edge belongs to the history of `entity` (of type
/// `entity_type`): the edge carries that type, both endpoints are correlated
/// to the entity, and if the edge names its entity it names this one.
pub fn df_belongs_to(
    graph: &LabeledPropertyGraph,
    rel: &Relationship,
    entity: &Node,
    entity_type: &str,
) -> bool {
    if rel.text(ENTITY_TYPE) != Some(entity_type) {
        return false;
    }
    if let Some(owner) = rel.text(ENTITY_UID) {
        if entity.text(UID) != Some(owner) {
            return false;
        }
    }
    is_correlated(graph, rel.source, entity.id) && is_correlated(graph, rel.target, entity.id)
}

pub fn activity(graph: &LabeledPropertyGraph, event: NodeRef) -> Option<&str> {
    graph.node(event).ok().and_then(|n| n.text(ACTIVITY))
}
