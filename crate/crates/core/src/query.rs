//! Query primitives over a derived event graph: entity histories,
//! directly- and eventually-follows, variants, durations and nested
//! patterns.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::model::{self, OrderKey, DF, ENTITY, ENTITY_TYPE, UID};
use crate::store::{
    GraphError, LabeledPropertyGraph, Node, NodeRef, Predicate, PropertyValue, RelRef,
};

#[derive(Debug, Error)]
pub enum QueryError {
    #[error("no entity with uID {0:?}")]
    UnknownEntity(String),
    #[error("no entities of type {0}")]
    UnknownEntityType(String),
    #[error("DF chain of {entity} is broken: {reason}")]
    BrokenChain { entity: String, reason: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Events joined by `DF` edges of one entity type.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EventPath {
    pub entity: NodeRef,
    pub entity_type: String,
    pub events: Vec<NodeRef>,
    pub rels: Vec<RelRef>,
}

impl EventPath {
    /// Number of edges.
    pub fn len(&self) -> usize {
        self.rels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rels.is_empty()
    }

    pub fn activities<'a>(&self, graph: &'a LabeledPropertyGraph) -> Vec<&'a str> {
        self.events
            .iter()
            .map(|e| model::activity(graph, *e).unwrap_or(""))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DurationResult {
    pub entity: NodeRef,
    pub entity_uid: String,
    pub start: NodeRef,
    pub end: NodeRef,
    pub elapsed_ms: i64,
}

impl DurationResult {
    pub fn iso(&self) -> String {
        iso_duration(self.elapsed_ms)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DurationMode {
    Max,
    Min,
    All,
}

impl std::str::FromStr for DurationMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "max" => Ok(Self::Max),
            "min" => Ok(Self::Min),
            "all" => Ok(Self::All),
            other => Err(format!(
                "unknown duration mode {other:?} (expected max, min or all)"
            )),
        }
    }
}

/// `PT…H…M…S`; hours are not folded into days.
pub fn iso_duration(ms: i64) -> String {
    let sign = if ms < 0 { "-" } else { "" };
    let ms = ms.unsigned_abs();
    let (h, rest) = (ms / 3_600_000, ms % 3_600_000);
    let (m, rest) = (rest / 60_000, rest % 60_000);
    let (s, frac) = (rest / 1000, rest % 1000);
    let mut out = format!("{sign}PT");
    if h > 0 {
        let _ = write!(out, "{h}H");
    }
    if m > 0 {
        let _ = write!(out, "{m}M");
    }
    if frac > 0 {
        let _ = write!(out, "{s}.{}S", format!("{frac:03}").trim_end_matches('0'));
    } else if s > 0 || (h == 0 && m == 0) {
        let _ = write!(out, "{s}S");
    }
    out
}

fn entity<'a>(graph: &'a LabeledPropertyGraph, uid: &str) -> Result<&'a Node, QueryError> {
    model::entity_by_uid(graph, uid)
        .and_then(|n| graph.node(n).ok())
        .ok_or_else(|| QueryError::UnknownEntity(uid.to_owned()))
}

fn require_type<'a>(
    graph: &'a LabeledPropertyGraph,
    entity_type: &'a str,
) -> Result<Vec<&'a Node>, QueryError> {
    let nodes: Vec<&Node> = model::entities_of_type(graph, entity_type).collect();
    if nodes.is_empty() {
        return Err(QueryError::UnknownEntityType(entity_type.to_owned()));
    }
    Ok(nodes)
}

fn activity_is(graph: &LabeledPropertyGraph, event: NodeRef, wanted: Option<&str>) -> bool {
    wanted.is_none_or(|a| model::activity(graph, event) == Some(a))
}

fn key(graph: &LabeledPropertyGraph, event: NodeRef) -> OrderKey {
    graph
        .node(event)
        .ok()
        .and_then(model::order_key)
        .unwrap_or((i64::MAX, event))
}

/// `DF` edges of `entity`'s own history, by source event.
fn history(
    graph: &LabeledPropertyGraph,
    entity: &Node,
    entity_type: &str,
) -> BTreeMap<NodeRef, Vec<(RelRef, NodeRef)>> {
    let mut out: BTreeMap<NodeRef, Vec<(RelRef, NodeRef)>> = BTreeMap::new();
    for event in model::correlated_events(graph, entity.id) {
        for rel in graph.out_rels(event, Some(DF)) {
            if model::df_belongs_to(graph, rel, entity, entity_type) {
                out.entry(event).or_default().push((rel.id, rel.target));
            }
        }
    }
    for succ in out.values_mut() {
        succ.sort_by_key(|(r, t)| (key(graph, *t), *r));
    }
    out
}

/// Correlated events of the entity with `uid` satisfying all `predicates`.
pub fn events_of_entity(
    graph: &LabeledPropertyGraph,
    uid: &str,
    predicates: &[Predicate],
) -> Result<BTreeSet<NodeRef>, QueryError> {
    let entity = entity(graph, uid)?;
    let mut out = BTreeSet::new();
    'events: for event in model::correlated_events(graph, entity.id) {
        let node = graph.node(event)?;
        for p in predicates {
            if !p.matches(&node.properties)? {
                continue 'events;
            }
        }
        out.insert(event);
    }
    Ok(out)
}

/// Endpoints of all `DF` edges of `entity_type` whose activities match the
/// optional filters, as a sorted multiset.
pub fn directly_follows_pairs(
    graph: &LabeledPropertyGraph,
    entity_type: &str,
    from: Option<&str>,
    to: Option<&str>,
) -> Result<Vec<(NodeRef, NodeRef)>, QueryError> {
    require_type(graph, entity_type)?;
    let mut pairs: Vec<(NodeRef, NodeRef)> = graph
        .relationships_of_type(DF)
        .filter(|r| r.text(ENTITY_TYPE) == Some(entity_type))
        .filter(|r| activity_is(graph, r.source, from) && activity_is(graph, r.target, to))
        .map(|r| (r.source, r.target))
        .collect();
    pairs.sort();
    Ok(pairs)
}

fn paths_from(
    start: NodeRef,
    succ: &BTreeMap<NodeRef, Vec<(RelRef, NodeRef)>>,
    mut accept: impl FnMut(NodeRef) -> bool,
) -> Vec<(Vec<NodeRef>, Vec<RelRef>)> {
    let mut found = Vec::new();
    let mut events = vec![start];
    let mut rels = Vec::new();
    // (next successor index) per path position
    let mut cursor = vec![0usize];
    while let Some(i) = cursor.last_mut() {
        let at = *events.last().expect("path is never empty here");
        let next = succ.get(&at).and_then(|s| s.get(*i)).copied();
        *i += 1;
        match next {
            Some((rel, target)) if !events.contains(&target) => {
                events.push(target);
                rels.push(rel);
                cursor.push(0);
                if accept(target) {
                    found.push((events.clone(), rels.clone()));
                }
            }
            Some(_) => {}
            None => {
                cursor.pop();
                events.pop();
                rels.pop();
            }
        }
    }
    found
}

/// Every path along an entity's own `DF` edges from an event with `from` to
/// a later event with `to`, for all entities of `entity_type`.
pub fn eventually_follows(
    graph: &LabeledPropertyGraph,
    entity_type: &str,
    from: &str,
    to: &str,
) -> Result<Vec<EventPath>, QueryError> {
    let mut out = Vec::new();
    for entity in require_type(graph, entity_type)? {
        let succ = history(graph, entity, entity_type);
        for start in model::correlated_events(graph, entity.id) {
            if !activity_is(graph, start, Some(from)) {
                continue;
            }
            for (events, rels) in paths_from(start, &succ, |e| activity_is(graph, e, Some(to))) {
                out.push(EventPath {
                    entity: entity.id,
                    entity_type: entity_type.to_owned(),
                    events,
                    rels,
                });
            }
        }
    }
    Ok(out)
}

/// Activities along the entity's `DF` chain of `entity_type`.
pub fn variant_of(
    graph: &LabeledPropertyGraph,
    uid: &str,
    entity_type: &str,
) -> Result<Vec<String>, QueryError> {
    let node = entity(graph, uid)?;
    if node.text(ENTITY_TYPE) != Some(entity_type) {
        return Err(QueryError::UnknownEntity(format!(
            "{uid} of type {entity_type}"
        )));
    }
    let broken = |reason: String| QueryError::BrokenChain {
        entity: uid.to_owned(),
        reason,
    };
    let events = model::correlated_events(graph, node.id);
    let succ = history(graph, node, entity_type);
    let mut indegree: HashMap<NodeRef, usize> = events.iter().map(|e| (*e, 0)).collect();
    for (from, targets) in &succ {
        if targets.len() > 1 {
            return Err(broken(format!("{from} has {} successors", targets.len())));
        }
        for (_, t) in targets {
            *indegree.entry(*t).or_default() += 1;
        }
    }
    if let Some((e, d)) = indegree.iter().find(|(_, d)| **d > 1) {
        return Err(broken(format!("{e} has {d} predecessors")));
    }
    let mut starts: Vec<NodeRef> = indegree
        .iter()
        .filter(|(_, d)| **d == 0)
        .map(|(e, _)| *e)
        .collect();
    starts.sort();
    let start = match starts.as_slice() {
        [] if events.is_empty() => return Ok(Vec::new()),
        [s] => *s,
        _ => return Err(broken(format!("{} chain starts", starts.len()))),
    };
    let mut chain = vec![start];
    let mut at = start;
    while let Some((_, next)) = succ.get(&at).and_then(|s| s.first()) {
        if chain.contains(next) {
            return Err(broken(format!("cycle at {next}")));
        }
        chain.push(*next);
        at = *next;
    }
    if chain.len() != events.len() {
        return Err(broken(format!(
            "chain covers {} of {} events",
            chain.len(),
            events.len()
        )));
    }
    Ok(chain
        .into_iter()
        .map(|e| model::activity(graph, e).unwrap_or("").to_owned())
        .collect())
}

fn reachable(
    start: NodeRef,
    succ: &BTreeMap<NodeRef, Vec<(RelRef, NodeRef)>>,
) -> BTreeSet<NodeRef> {
    let mut seen = BTreeSet::new();
    let mut todo = vec![start];
    while let Some(at) = todo.pop() {
        for (_, next) in succ.get(&at).into_iter().flatten() {
            if seen.insert(*next) {
                todo.push(*next);
            }
        }
    }
    seen
}

/// Per entity: time from its earliest `from` event to the earliest `to`
/// event reachable from it. `Max`/`Min` keep one result, ties going to the
/// smaller uID; `All` lists every entity by uID.
pub fn duration_between(
    graph: &LabeledPropertyGraph,
    entity_type: &str,
    from: &str,
    to: &str,
    mode: DurationMode,
) -> Result<Vec<DurationResult>, QueryError> {
    let mut results = Vec::new();
    for entity in require_type(graph, entity_type)? {
        let mut events = model::correlated_events(graph, entity.id);
        events.sort_by_key(|e| key(graph, *e));
        let Some(start) = events
            .iter()
            .copied()
            .find(|e| activity_is(graph, *e, Some(from)))
        else {
            continue;
        };
        let succ = history(graph, entity, entity_type);
        let Some(end) = reachable(start, &succ)
            .into_iter()
            .filter(|e| activity_is(graph, *e, Some(to)))
            .min_by_key(|e| key(graph, *e))
        else {
            continue;
        };
        results.push(DurationResult {
            entity: entity.id,
            entity_uid: entity.text(UID).unwrap_or_default().to_owned(),
            start,
            end,
            elapsed_ms: key(graph, end).0 - key(graph, start).0,
        });
    }
    results.sort_by(|a, b| a.entity_uid.cmp(&b.entity_uid));
    let pick = match mode {
        DurationMode::All => return Ok(results),
        DurationMode::Max => results.iter().max_by(|a, b| {
            a.elapsed_ms
                .cmp(&b.elapsed_ms)
                .then(b.entity_uid.cmp(&a.entity_uid))
        }),
        DurationMode::Min => results.iter().min_by(|a, b| {
            a.elapsed_ms
                .cmp(&b.elapsed_ms)
                .then(a.entity_uid.cmp(&b.entity_uid))
        }),
    };
    Ok(pick.cloned().into_iter().collect())
}

/// A `DF` edge of a child entity matching an activity pair.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct PatternOccurrence {
    pub child: NodeRef,
    pub rel: RelRef,
    pub from_event: NodeRef,
    pub to_event: NodeRef,
}

/// Edges `from -> to` in the own histories of `child_type` entities.
pub fn df_pattern_occurrences(
    graph: &LabeledPropertyGraph,
    child_type: &str,
    from: &str,
    to: &str,
) -> Result<Vec<PatternOccurrence>, QueryError> {
    let mut out = Vec::new();
    for child in require_type(graph, child_type)? {
        for (source, targets) in history(graph, child, child_type) {
            if !activity_is(graph, source, Some(from)) {
                continue;
            }
            for (rel, target) in targets {
                if activity_is(graph, target, Some(to)) {
                    out.push(PatternOccurrence {
                        child: child.id,
                        rel,
                        from_event: source,
                        to_event: target,
                    });
                }
            }
        }
    }
    out.sort();
    Ok(out)
}

fn parents_of(
    graph: &LabeledPropertyGraph,
    occ: &PatternOccurrence,
    parent_type: &str,
) -> Vec<NodeRef> {
    graph
        .out_rels(occ.from_event, Some(model::E_EN))
        .map(|r| r.target)
        .filter(|p| {
            graph
                .node(*p)
                .is_ok_and(|n| n.has_label(ENTITY) && n.text(ENTITY_TYPE) == Some(parent_type))
        })
        .filter(|p| model::is_correlated(graph, occ.to_event, *p))
        .collect()
}

/// uIDs of `parent_type` entities sharing the events of at least
/// `min_count` distinct `child_type` entities that have a `from -> to` edge.
pub fn entities_with_df_pattern(
    graph: &LabeledPropertyGraph,
    child_type: &str,
    from: &str,
    to: &str,
    parent_type: &str,
    min_count: usize,
) -> Result<BTreeSet<String>, QueryError> {
    require_type(graph, parent_type)?;
    let mut children: BTreeMap<NodeRef, BTreeSet<NodeRef>> = BTreeMap::new();
    for occ in df_pattern_occurrences(graph, child_type, from, to)? {
        for parent in parents_of(graph, &occ, parent_type) {
            children.entry(parent).or_default().insert(occ.child);
        }
    }
    Ok(children
        .into_iter()
        .filter(|(_, c)| c.len() >= min_count)
        .filter_map(|(p, _)| graph.node(p).ok()?.text(UID).map(str::to_owned))
        .collect())
}

/// One path per reachable target: from the parent's earliest `from` event
/// that reaches it, along the parent's own `DF` edges.
pub fn paths_in_parent(
    graph: &LabeledPropertyGraph,
    parent_uid: &str,
    from: &str,
    targets: &BTreeSet<NodeRef>,
) -> Result<Vec<EventPath>, QueryError> {
    let parent = entity(graph, parent_uid)?;
    let entity_type = parent.text(ENTITY_TYPE).unwrap_or_default().to_owned();
    let succ = history(graph, parent, &entity_type);
    let mut starts: Vec<NodeRef> = model::correlated_events(graph, parent.id)
        .into_iter()
        .filter(|e| activity_is(graph, *e, Some(from)))
        .collect();
    starts.sort_by_key(|e| key(graph, *e));
    let mut out = Vec::new();
    for target in targets {
        let found = starts
            .iter()
            .find_map(|s| paths_from(*s, &succ, |e| e == *target).into_iter().next());
        if let Some((events, rels)) = found {
            out.push(EventPath {
                entity: parent.id,
                entity_type: entity_type.clone(),
                events,
                rels,
            });
        }
    }
    Ok(out)
}

fn entity_uid(graph: &LabeledPropertyGraph, entity: NodeRef) -> String {
    graph
        .node(entity)
        .ok()
        .and_then(|n| n.prop(UID))
        .map(PropertyValue::to_plain_string)
        .unwrap_or_default()
}

/// `entity,length,activities,events` rows; activities joined by ` -> `,
/// events by spaces.
pub fn paths_to_csv(graph: &LabeledPropertyGraph, paths: &[EventPath]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut rows = vec![vec![
        "entity".to_owned(),
        "length".into(),
        "activities".into(),
        "events".into(),
    ]];
    for p in paths {
        rows.push(vec![
            entity_uid(graph, p.entity),
            p.len().to_string(),
            p.activities(graph).join(" -> "),
            p.events
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join(" "),
        ]);
    }
    for row in rows {
        w.write_record(&row).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("writing to memory")).expect("csv output is utf-8")
}

pub fn paths_to_text(graph: &LabeledPropertyGraph, paths: &[EventPath]) -> String {
    let mut out = String::new();
    for p in paths {
        let _ = writeln!(
            out,
            "{} ({} edges): {}",
            entity_uid(graph, p.entity),
            p.len(),
            p.activities(graph).join(" -> ")
        );
    }
    out
}

/// `entity,start,end,elapsed` rows with ISO-8601 durations.
pub fn durations_to_csv(results: &[DurationResult]) -> String {
    let mut out = String::from("entity,start,end,elapsed\n");
    for r in results {
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(Vec::new());
        w.write_record([
            r.entity_uid.clone(),
            r.start.to_string(),
            r.end.to_string(),
            r.iso(),
        ])
        .expect("writing to memory");
        out.push_str(
            std::str::from_utf8(&w.into_inner().expect("writing to memory")).expect("utf-8"),
        );
    }
    out
}
