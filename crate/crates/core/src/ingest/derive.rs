use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use rayon::prelude::*;

use crate::model::{
    self, COLUMNS_ATTR, DF, ENTITY, ENTITY_TYPE, ENTITY_UID, EVENT, E_EN, ID, LOG, LOG_ID, L_E, UID,
};
use crate::store::{GraphError, LabeledPropertyGraph, Node, NodeRef, Properties, PropertyValue};

use super::config::{EntityRule, ReificationRule};
use super::table::EventTable;
use super::IngestError;

/// Creates one `Event` node per row, in row order. Returns the number of
/// events created.
pub fn import_events(
    graph: &mut LabeledPropertyGraph,
    table: &EventTable,
) -> Result<usize, IngestError> {
    if graph.count_label(EVENT) > 0 {
        return Err(IngestError::NonEmptyGraph);
    }
    if table.is_empty() {
        return Ok(0);
    }
    graph.set_attribute(COLUMNS_ATTR, PropertyValue::TextList(table.header.clone()));
    for record in &table.rows {
        graph.add_node([EVENT], record.properties.clone())?;
    }
    Ok(table.len())
}

/// Columns of the imported table, or the property keys seen on events when
/// the header was not recorded.
pub fn graph_columns(graph: &LabeledPropertyGraph) -> BTreeSet<String> {
    if let Some(PropertyValue::TextList(cols)) = graph.attribute(COLUMNS_ATTR) {
        return cols.iter().cloned().collect();
    }
    graph
        .nodes_with_label(EVENT)
        .flat_map(|n| n.properties.keys().cloned())
        .collect()
}

fn require_column(graph: &LabeledPropertyGraph, column: &str) -> Result<(), IngestError> {
    if graph_columns(graph).contains(column) {
        Ok(())
    } else {
        Err(IngestError::UnknownColumn(column.to_owned()))
    }
}

/// One `Log` per distinct `LogID` (events without one go to
/// `default_log_id`) and an `L_E` edge to every event lacking one. Returns
/// the number of logs created.
pub fn create_logs(
    graph: &mut LabeledPropertyGraph,
    default_log_id: &str,
) -> Result<usize, IngestError> {
    let mut logs: HashMap<String, NodeRef> = graph
        .nodes_with_label(LOG)
        .filter_map(|n| Some((n.prop(ID)?.to_plain_string(), n.id)))
        .collect();
    let pending: Vec<(NodeRef, String)> = graph
        .nodes_with_label(EVENT)
        .filter(|e| graph.in_rels(e.id, Some(L_E)).next().is_none())
        .map(|e| {
            let id = e
                .prop(LOG_ID)
                .map(PropertyValue::to_plain_string)
                .unwrap_or_else(|| default_log_id.to_owned());
            (e.id, id)
        })
        .collect();
    let mut created = 0;
    for (event, log_id) in pending {
        let log = match logs.get(&log_id) {
            Some(l) => *l,
            None => {
                let l = graph.add_node(
                    [LOG],
                    model_props([(ID, PropertyValue::from(log_id.as_str()))]),
                )?;
                logs.insert(log_id, l);
                created += 1;
                l
            }
        };
        graph.add_relationship(log, event, L_E, Properties::new())?;
    }
    Ok(created)
}

fn model_props<const N: usize>(pairs: [(&str, PropertyValue); N]) -> Properties {
    pairs.into_iter().map(|(k, v)| (k.to_owned(), v)).collect()
}

fn passing_events<'a>(
    graph: &'a LabeledPropertyGraph,
    rule: &EntityRule,
) -> Result<Vec<(&'a Node, &'a PropertyValue)>, IngestError> {
    require_column(graph, &rule.id_column)?;
    let predicates = rule.predicates()?;
    let mut out = Vec::new();
    for event in graph.nodes_with_label(EVENT) {
        let Some(id) = event.prop(&rule.id_column) else {
            continue;
        };
        let mut pass = true;
        for p in &predicates {
            if !p.matches(&event.properties)? {
                pass = false;
                break;
            }
        }
        if pass {
            out.push((event, id));
        }
    }
    Ok(out)
}

fn entity_uid(entity_type: &str, id: &PropertyValue) -> String {
    format!("{entity_type}{}", id.to_plain_string())
}

/// One `Entity` per distinct `id_column` value among events passing the
/// rule's filter. Returns the number created; existing entities are kept.
pub fn derive_entities(
    graph: &mut LabeledPropertyGraph,
    rule: &EntityRule,
) -> Result<usize, IngestError> {
    let mut wanted: Vec<(String, PropertyValue)> = Vec::new();
    let mut seen = HashSet::new();
    for (_, id) in passing_events(graph, rule)? {
        let uid = entity_uid(&rule.entity_type, id);
        if seen.insert(uid.clone()) {
            wanted.push((uid, id.clone()));
        }
    }
    let mut created = 0;
    for (uid, id) in wanted {
        if let Some(existing) = model::entity_by_uid(graph, &uid) {
            let node = graph.node(existing)?;
            let same = node.text(ENTITY_TYPE) == Some(rule.entity_type.as_str())
                && node.prop(ID).map(PropertyValue::to_plain_string) == Some(id.to_plain_string());
            if same {
                continue;
            }
            return Err(GraphError::UniquenessViolation {
                label: ENTITY.into(),
                key: UID.into(),
                values: vec![uid],
            }
            .into());
        }
        graph.add_node(
            [ENTITY],
            model_props([
                (ID, id),
                (UID, PropertyValue::Text(uid)),
                (ENTITY_TYPE, PropertyValue::from(rule.entity_type.as_str())),
            ]),
        )?;
        created += 1;
    }
    Ok(created)
}

fn link(
    graph: &mut LabeledPropertyGraph,
    event: NodeRef,
    entity: NodeRef,
) -> Result<bool, IngestError> {
    if model::is_correlated(graph, event, entity) {
        return Ok(false);
    }
    graph.add_relationship(event, entity, E_EN, Properties::new())?;
    Ok(true)
}

/// `E_EN` from every event passing the rule to the entity named by its
/// `id_column` value. Returns the number of edges created.
pub fn correlate_events(
    graph: &mut LabeledPropertyGraph,
    rule: &EntityRule,
) -> Result<usize, IngestError> {
    let pairs: Vec<(NodeRef, NodeRef)> = passing_events(graph, rule)?
        .into_iter()
        .filter_map(|(event, id)| {
            let entity = model::entity_by_uid(graph, &entity_uid(&rule.entity_type, id))?;
            let node = graph.node(entity).ok()?;
            (node.text(ENTITY_TYPE) == Some(rule.entity_type.as_str()))
                .then_some((event.id, entity))
        })
        .collect();
    let mut created = 0;
    for (event, entity) in pairs {
        created += usize::from(link(graph, event, entity)?);
    }
    Ok(created)
}

fn log_of(graph: &LabeledPropertyGraph, event: NodeRef) -> Option<NodeRef> {
    graph.in_rels(event, Some(L_E)).map(|r| r.source).min()
}

/// Chains the events of every entity of `entity_type` in `(timestamp,
/// NodeRef)` order with `DF` edges carrying `EntityType` and `EntityUID`.
/// With `within_log`, chains are cut per log. Returns the number of edges
/// created.
pub fn derive_df(
    graph: &mut LabeledPropertyGraph,
    entity_type: &str,
    within_log: bool,
) -> Result<usize, IngestError> {
    let entities: Vec<(NodeRef, String)> = model::entities_of_type(graph, entity_type)
        .map(|n| (n.id, n.text(UID).unwrap_or_default().to_owned()))
        .collect();
    if entities.is_empty() {
        return Err(IngestError::UnknownEntityType(entity_type.to_owned()));
    }
    let g: &LabeledPropertyGraph = graph;
    let chains: Vec<Vec<(NodeRef, NodeRef, String)>> = entities
        .par_iter()
        .map(|(entity, uid)| {
            let mut groups: BTreeMap<Option<NodeRef>, Vec<(i64, NodeRef)>> = BTreeMap::new();
            for event in model::correlated_events(g, *entity) {
                let key = g
                    .node(event)
                    .ok()
                    .and_then(model::order_key)
                    .ok_or(IngestError::MissingTimestamp(event))?;
                let log = if within_log { log_of(g, event) } else { None };
                groups.entry(log).or_default().push(key);
            }
            let mut edges = Vec::new();
            for mut events in groups.into_values() {
                events.sort_unstable();
                edges.extend(events.windows(2).map(|w| (w[0].1, w[1].1, uid.clone())));
            }
            Ok(edges)
        })
        .collect::<Result<_, IngestError>>()?;

    let existing: HashSet<(NodeRef, NodeRef, String)> = graph
        .relationships_of_type(DF)
        .filter(|r| r.text(ENTITY_TYPE) == Some(entity_type))
        .map(|r| {
            (
                r.source,
                r.target,
                r.text(ENTITY_UID).unwrap_or_default().to_owned(),
            )
        })
        .collect();
    let mut created = 0;
    for (from, to, uid) in chains.into_iter().flatten() {
        if existing.contains(&(from, to, uid.clone())) {
            continue;
        }
        graph.add_relationship(
            from,
            to,
            DF,
            model_props([
                (ENTITY_TYPE, PropertyValue::from(entity_type)),
                (ENTITY_UID, PropertyValue::Text(uid)),
            ]),
        )?;
        created += 1;
    }
    Ok(created)
}

fn id_map(graph: &LabeledPropertyGraph, entity_type: &str) -> BTreeMap<String, NodeRef> {
    model::entities_of_type(graph, entity_type)
        .filter_map(|n| Some((n.prop(ID)?.to_plain_string(), n.id)))
        .collect()
}

/// Creates a composite entity for every distinct `(type1 ID, type2 ID)` pair
/// observed on a `type2` event whose `ref_to_column` names a `type1`
/// entity. Returns the number created.
pub fn reify_relation(
    graph: &mut LabeledPropertyGraph,
    rule: &ReificationRule,
) -> Result<usize, IngestError> {
    let firsts = id_map(graph, &rule.type1);
    if firsts.is_empty() {
        return Err(IngestError::UnknownEntityType(rule.type1.clone()));
    }
    let seconds = id_map(graph, &rule.type2);
    if seconds.is_empty() {
        return Err(IngestError::UnknownEntityType(rule.type2.clone()));
    }
    require_column(graph, &rule.ref_to_column)?;

    let mut pairs: BTreeSet<(String, String)> = BTreeSet::new();
    for (id2, n2) in &seconds {
        for event in model::correlated_events(graph, *n2) {
            let Some(reference) = graph.node(event)?.prop(&rule.ref_to_column) else {
                continue;
            };
            let id1 = reference.to_plain_string();
            if rule.null_sentinels.contains(&id1) || !firsts.contains_key(&id1) {
                continue;
            }
            pairs.insert((id1, id2.clone()));
        }
    }

    let key1 = format!("{}ID", rule.type1);
    let key2 = format!("{}ID", rule.type2);
    let mut created = 0;
    for (id1, id2) in pairs {
        let id = format!("{id1}_{id2}");
        let uid = format!("{}_{id}", rule.composite_type);
        if let Some(existing) = model::entity_by_uid(graph, &uid) {
            let node = graph.node(existing)?;
            if node.text(&key1) == Some(id1.as_str()) && node.text(&key2) == Some(id2.as_str()) {
                continue;
            }
            return Err(GraphError::UniquenessViolation {
                label: ENTITY.into(),
                key: UID.into(),
                values: vec![uid],
            }
            .into());
        }
        let mut properties = model_props([
            (ID, PropertyValue::Text(id)),
            (UID, PropertyValue::Text(uid)),
            (
                ENTITY_TYPE,
                PropertyValue::from(rule.composite_type.as_str()),
            ),
        ]);
        properties.insert(key1.clone(), PropertyValue::Text(id1));
        properties.insert(key2.clone(), PropertyValue::Text(id2));
        graph.add_node([ENTITY], properties)?;
        created += 1;
    }
    Ok(created)
}

/// Correlates each composite of `composite_type` with every event of the
/// `member_type` entity it refers to. Returns the number of edges created.
pub fn correlate_composite(
    graph: &mut LabeledPropertyGraph,
    composite_type: &str,
    member_type: &str,
) -> Result<usize, IngestError> {
    let key = format!("{member_type}ID");
    let composites: Vec<(NodeRef, Option<String>)> = model::entities_of_type(graph, composite_type)
        .map(|n| (n.id, n.prop(&key).map(PropertyValue::to_plain_string)))
        .collect();
    if composites.is_empty() {
        return Err(IngestError::UnknownEntityType(composite_type.to_owned()));
    }
    if composites.iter().all(|(_, m)| m.is_none()) {
        return Err(IngestError::UnknownEntityType(member_type.to_owned()));
    }
    let members = id_map(graph, member_type);
    let mut links = Vec::new();
    for (composite, member_id) in composites {
        let Some(member) = member_id.and_then(|m| members.get(&m).copied()) else {
            continue;
        };
        for event in model::correlated_events(graph, member) {
            links.push((event, composite));
        }
    }
    let mut created = 0;
    for (event, composite) in links {
        created += usize::from(link(graph, event, composite)?);
    }
    Ok(created)
}
