//! Checks a graph against the event-graph constraint families.
//!
//! | family | subject                      |
//! |--------|------------------------------|
//! | V1     | labels, mandatory properties, identifiers |
//! | V2     | event to entity correlation  |
//! | V3     | directly-follows edges       |
//! | V4     | logs                         |
//! | V5     | event classes                |
//! | V6     | aggregated directly-follows  |

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::model::{
    self, ACTIVITY, CLASS, COUNT, DF, DF_C, ENTITY, ENTITY_TYPE, ENTITY_UID, EVENT, E_C, E_EN, ID,
    LOG, L_E, NODE_LABELS, TIMESTAMP, TYPE, UID,
};
use crate::store::{LabeledPropertyGraph, Node, NodeRef, PropertyValue, RelRef, Relationship};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Family {
    V1,
    V2,
    V3,
    V4,
    V5,
    V6,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::V1,
        Family::V2,
        Family::V3,
        Family::V4,
        Family::V5,
        Family::V6,
    ];
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "V{}", *self as u8 + 1)
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "V1" => Ok(Family::V1),
            "V2" => Ok(Family::V2),
            "V3" => Ok(Family::V3),
            "V4" => Ok(Family::V4),
            "V5" => Ok(Family::V5),
            "V6" => Ok(Family::V6),
            other => Err(format!(
                "unknown constraint family {other:?} (expected V1..V6)"
            )),
        }
    }
}

impl Serialize for Family {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// A node or relationship named by a violation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ElementRef {
    Node(NodeRef),
    Rel(RelRef),
}

impl fmt::Display for ElementRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ElementRef::Node(n) => n.fmt(f),
            ElementRef::Rel(r) => r.fmt(f),
        }
    }
}

impl Serialize for ElementRef {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl From<NodeRef> for ElementRef {
    fn from(n: NodeRef) -> Self {
        ElementRef::Node(n)
    }
}

impl From<RelRef> for ElementRef {
    fn from(r: RelRef) -> Self {
        ElementRef::Rel(r)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub family: Family,
    pub constraint: u8,
    pub refs: Vec<ElementRef>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.family, self.constraint)?;
        for (i, r) in self.refs.iter().enumerate() {
            f.write_str(if i == 0 { " " } else { "," })?;
            r.fmt(f)?;
        }
        write!(f, ": {}", self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct ViolationReport {
    pub violations: Vec<Violation>,
    /// Findings that were downgraded by an option.
    pub warnings: Vec<Violation>,
}

impl ViolationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.violations.len()
    }

    pub fn of_family(&self, family: Family) -> impl Iterator<Item = &Violation> + '_ {
        self.violations.iter().filter(move |v| v.family == family)
    }

    /// One violation per line; warnings are prefixed with `warning:`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for v in &self.violations {
            out.push_str(&v.to_string());
            out.push('\n');
        }
        for w in &self.warnings {
            out.push_str("warning: ");
            out.push_str(&w.to_string());
            out.push('\n');
        }
        out
    }

    /// One JSON object per line. Warnings carry `"severity":"warning"`.
    pub fn to_json_lines(&self) -> String {
        #[derive(Serialize)]
        struct Record<'a> {
            severity: &'a str,
            #[serde(flatten)]
            violation: &'a Violation,
        }
        let mut out = String::new();
        let tagged = self
            .violations
            .iter()
            .map(|v| ("error", v))
            .chain(self.warnings.iter().map(|w| ("warning", w)));
        for (severity, violation) in tagged {
            out.push_str(
                &serde_json::to_string(&Record {
                    severity,
                    violation,
                })
                .expect("plain data"),
            );
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidateOptions {
    pub families: BTreeSet<Family>,
    /// Report `DF` edges between events of different logs as warnings.
    pub allow_cross_log: bool,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self {
            families: Family::ALL.into_iter().collect(),
            allow_cross_log: false,
        }
    }
}

impl ValidateOptions {
    pub fn only(families: impl IntoIterator<Item = Family>) -> Self {
        Self {
            families: families.into_iter().collect(),
            ..Self::default()
        }
    }
}

pub fn validate(graph: &LabeledPropertyGraph, families: &BTreeSet<Family>) -> ViolationReport {
    validate_with(
        graph,
        &ValidateOptions {
            families: families.clone(),
            ..ValidateOptions::default()
        },
    )
}

pub fn validate_with(graph: &LabeledPropertyGraph, options: &ValidateOptions) -> ViolationReport {
    let families: Vec<Family> = options.families.iter().copied().collect();
    let found: Vec<Findings> = families
        .par_iter()
        .map(|f| {
            let mut out = Findings::default();
            let checker = Checker {
                graph,
                options,
                out: &mut out,
            };
            checker.run(*f);
            out
        })
        .collect();
    let mut report = ViolationReport::default();
    for f in found {
        report.violations.extend(f.violations);
        report.warnings.extend(f.warnings);
    }
    let key = |v: &Violation| (v.family, v.refs.clone(), v.constraint, v.message.clone());
    report.violations.sort_by_key(key);
    report.warnings.sort_by_key(key);
    report
}

/// A node on the DFS stack: its successors, the next successor index and
/// the edge used to enter it.
type Frame = (NodeRef, Vec<(RelRef, NodeRef)>, usize, Option<RelRef>);

/// One cycle over `DF` edges (self-loops excluded), as the edges in order.
pub fn acyclicity_check(graph: &LabeledPropertyGraph) -> Option<Vec<RelRef>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Open,
        Done,
    }
    let n = graph
        .nodes()
        .map(|n| n.id.0 as usize + 1)
        .max()
        .unwrap_or(0);
    let mut mark = vec![Mark::New; n];
    let succ = |v: NodeRef| -> Vec<(RelRef, NodeRef)> {
        graph
            .out_rels(v, Some(DF))
            .filter(|r| r.source != r.target)
            .map(|r| (r.id, r.target))
            .collect()
    };
    let mut starts: Vec<NodeRef> = graph.relationships_of_type(DF).map(|r| r.source).collect();
    starts.sort();
    starts.dedup();
    for start in starts {
        if mark[start.0 as usize] != Mark::New {
            continue;
        }
        let mut stack: Vec<Frame> = vec![(start, succ(start), 0, None)];
        mark[start.0 as usize] = Mark::Open;
        while let Some(top) = stack.last_mut() {
            if top.2 == top.1.len() {
                mark[top.0 .0 as usize] = Mark::Done;
                stack.pop();
                continue;
            }
            let (rel, next) = top.1[top.2];
            top.2 += 1;
            match mark[next.0 as usize] {
                Mark::Done => {}
                Mark::New => {
                    mark[next.0 as usize] = Mark::Open;
                    let s = succ(next);
                    stack.push((next, s, 0, Some(rel)));
                }
                Mark::Open => {
                    let pos = stack
                        .iter()
                        .position(|f| f.0 == next)
                        .expect("open node is on the stack");
                    let mut cycle: Vec<RelRef> =
                        stack[pos + 1..].iter().filter_map(|f| f.3).collect();
                    cycle.push(rel);
                    return Some(cycle);
                }
            }
        }
    }
    None
}

#[derive(Default)]
struct Findings {
    violations: Vec<Violation>,
    warnings: Vec<Violation>,
}

struct Checker<'a> {
    graph: &'a LabeledPropertyGraph,
    options: &'a ValidateOptions,
    out: &'a mut Findings,
}

fn semantic_label(node: &Node) -> Option<&'static str> {
    NODE_LABELS.into_iter().find(|l| node.has_label(l))
}

fn nonempty_text(node: &Node, key: &str) -> bool {
    node.text(key).is_some_and(|s| !s.is_empty())
}

impl Checker<'_> {
    fn report(&mut self, family: Family, constraint: u8, refs: Vec<ElementRef>, message: String) {
        self.out.violations.push(Violation {
            family,
            constraint,
            refs,
            message,
        });
    }

    fn run(mut self, family: Family) {
        match family {
            Family::V1 => self.typing(),
            Family::V2 => self.correlation(),
            Family::V3 => self.directly_follows(),
            Family::V4 => self.logs(),
            Family::V5 => self.classes(),
            Family::V6 => self.aggregated(),
        }
    }

    fn is(&self, node: NodeRef, label: &str) -> bool {
        self.graph.node(node).is_ok_and(|n| n.has_label(label))
    }

    fn typing(&mut self) {
        let g = self.graph;
        for node in g.nodes() {
            let roles: Vec<&str> = node
                .labels
                .iter()
                .map(String::as_str)
                .filter(|l| model::is_node_label(l))
                .collect();
            if roles.len() > 1 {
                self.report(
                    Family::V1,
                    1,
                    vec![node.id.into()],
                    format!("node has several semantic labels {roles:?}"),
                );
            }
            for l in node.labels.iter().filter(|l| model::is_rel_type(l)) {
                self.report(
                    Family::V1,
                    2,
                    vec![node.id.into()],
                    format!("relationship type {l} used as a node label"),
                );
            }
            self.mandatory(node);
        }
        for rel in g.relationships() {
            if model::is_node_label(&rel.rel_type) {
                self.report(
                    Family::V1,
                    3,
                    vec![rel.id.into()],
                    format!("node label {} used as a relationship type", rel.rel_type),
                );
            }
        }
        self.unique(
            ENTITY,
            |n| n.prop(UID).map(PropertyValue::to_plain_string),
            "uID",
        );
        self.unique(
            LOG,
            |n| n.prop(ID).map(PropertyValue::to_plain_string),
            "log ID",
        );
        self.unique(
            CLASS,
            |n| {
                Some(format!(
                    "{}\u{0}{}",
                    n.prop(TYPE)?.to_plain_string(),
                    n.prop(ID)?.to_plain_string()
                ))
            },
            "class (Type, ID)",
        );
    }

    fn mandatory(&mut self, node: &Node) {
        let mut missing = Vec::new();
        match semantic_label(node) {
            Some(EVENT) => {
                if !nonempty_text(node, ACTIVITY) {
                    missing.push("non-empty text Activity");
                }
                if node
                    .prop(TIMESTAMP)
                    .and_then(PropertyValue::as_timestamp)
                    .is_none()
                {
                    missing.push("timestamp Timestamp");
                }
            }
            Some(ENTITY) => {
                if !nonempty_text(node, ENTITY_TYPE) {
                    missing.push("text EntityType");
                }
                if node.prop(ID).is_none() {
                    missing.push("ID");
                }
                match (node.text(ENTITY_TYPE), node.prop(ID), node.text(UID)) {
                    (_, _, None) => missing.push("text uID"),
                    (Some(t), Some(id), Some(uid)) => {
                        let id = id.to_plain_string();
                        if uid != format!("{t}{id}") && uid != format!("{t}_{id}") {
                            self.report(
                                Family::V1,
                                4,
                                vec![node.id.into()],
                                format!("uID {uid:?} is not EntityType followed by ID"),
                            );
                        }
                    }
                    _ => {}
                }
            }
            Some(LOG) => {
                if node.prop(ID).is_none() {
                    missing.push("ID");
                }
            }
            Some(CLASS) => {
                if !nonempty_text(node, TYPE) {
                    missing.push("text Type");
                }
                if node.prop(ID).is_none() {
                    missing.push("ID");
                }
            }
            _ => {}
        }
        if !missing.is_empty() {
            let label = semantic_label(node).unwrap_or_default();
            self.report(
                Family::V1,
                4,
                vec![node.id.into()],
                format!("{label} node lacks {}", missing.join(", ")),
            );
        }
    }

    fn unique(&mut self, label: &str, key: impl Fn(&Node) -> Option<String>, what: &str) {
        let mut groups: BTreeMap<String, Vec<NodeRef>> = BTreeMap::new();
        for node in self.graph.nodes_with_label(label) {
            if let Some(k) = key(node) {
                groups.entry(k).or_default().push(node.id);
            }
        }
        for (k, nodes) in groups {
            if nodes.len() > 1 {
                let shown = k.replace('\u{0}', ", ");
                self.report(
                    Family::V1,
                    5,
                    nodes.into_iter().map(ElementRef::Node).collect(),
                    format!("duplicate {what} {shown:?}"),
                );
            }
        }
    }

    fn endpoints(&mut self, family: Family, rel: &Relationship, from: &str, to: &str) -> bool {
        if self.is(rel.source, from) && self.is(rel.target, to) {
            return true;
        }
        self.report(
            family,
            1,
            vec![rel.id.into(), rel.source.into(), rel.target.into()],
            format!("{} must lead from {from} to {to}", rel.rel_type),
        );
        false
    }

    fn correlation(&mut self) {
        let g = self.graph;
        let mut seen: HashMap<(NodeRef, NodeRef), RelRef> = HashMap::new();
        for rel in g.relationships_of_type(E_EN) {
            if !self.endpoints(Family::V2, rel, EVENT, ENTITY) {
                continue;
            }
            if let Some(first) = seen.get(&(rel.source, rel.target)) {
                let first = *first;
                self.report(
                    Family::V2,
                    1,
                    vec![first.into(), rel.id.into()],
                    format!(
                        "event {} correlated to entity {} more than once",
                        rel.source, rel.target
                    ),
                );
            } else {
                seen.insert((rel.source, rel.target), rel.id);
            }
        }
        for event in g.nodes_with_label(EVENT) {
            if !g
                .out_rels(event.id, Some(E_EN))
                .any(|r| self.is(r.target, ENTITY))
            {
                self.report(
                    Family::V2,
                    2,
                    vec![event.id.into()],
                    "event is correlated to no entity".into(),
                );
            }
        }
        for entity in g.nodes_with_label(ENTITY) {
            if !g
                .in_rels(entity.id, Some(E_EN))
                .any(|r| self.is(r.source, EVENT))
            {
                self.report(
                    Family::V2,
                    3,
                    vec![entity.id.into()],
                    "entity has no correlated event".into(),
                );
            }
        }
    }

    fn directly_follows(&mut self) {
        let g = self.graph;
        // sorted ordering keys of each entity's events, built on demand
        let mut histories: HashMap<NodeRef, Vec<(i64, NodeRef)>> = HashMap::new();
        for rel in g.relationships_of_type(DF) {
            let refs = vec![
                ElementRef::Rel(rel.id),
                rel.source.into(),
                rel.target.into(),
            ];
            if !(self.is(rel.source, EVENT) && self.is(rel.target, EVENT)) {
                self.report(
                    Family::V3,
                    1,
                    refs,
                    "DF must lead from Event to Event".into(),
                );
                continue;
            }
            let Some(entity_type) = rel.text(ENTITY_TYPE) else {
                self.report(
                    Family::V3,
                    1,
                    refs,
                    "DF edge lacks a text EntityType".into(),
                );
                continue;
            };
            if rel.source == rel.target {
                self.report(Family::V3, 5, refs.clone(), "DF self-loop".into());
            }
            if !self.same_log(rel.source, rel.target) {
                let v = Violation {
                    family: Family::V3,
                    constraint: 2,
                    refs: refs.clone(),
                    message: "DF between events of different logs".into(),
                };
                if self.options.allow_cross_log {
                    self.out.warnings.push(v);
                } else {
                    self.out.violations.push(v);
                }
            }
            let k1 = g.node(rel.source).ok().and_then(model::order_key);
            let k2 = g.node(rel.target).ok().and_then(model::order_key);
            let (Some(k1), Some(k2)) = (k1, k2) else {
                continue;
            };
            if k1.0 > k2.0 {
                self.report(
                    Family::V3,
                    3,
                    refs.clone(),
                    "DF goes backwards in time".into(),
                );
            }
            if !self.witnessed(rel, entity_type, k1, k2, &mut histories) {
                self.report(
                    Family::V3,
                    4,
                    refs,
                    format!("no {entity_type} entity has these events as consecutive events"),
                );
            }
        }
        if let Some(cycle) = acyclicity_check(g) {
            self.report(
                Family::V3,
                6,
                cycle.into_iter().map(ElementRef::Rel).collect(),
                "DF edges form a cycle".into(),
            );
        }
    }

    fn same_log(&self, a: NodeRef, b: NodeRef) -> bool {
        self.graph.in_rels(a, Some(L_E)).any(|la| {
            self.is(la.source, LOG)
                && self
                    .graph
                    .in_rels(b, Some(L_E))
                    .any(|lb| lb.source == la.source)
        })
    }

    fn witnessed(
        &self,
        rel: &Relationship,
        entity_type: &str,
        k1: (i64, NodeRef),
        k2: (i64, NodeRef),
        histories: &mut HashMap<NodeRef, Vec<(i64, NodeRef)>>,
    ) -> bool {
        let g = self.graph;
        if k1 >= k2 {
            return true;
        }
        let owner = rel.text(ENTITY_UID);
        let candidates: Vec<NodeRef> = g
            .out_rels(rel.source, Some(E_EN))
            .map(|r| r.target)
            .filter(|e| {
                g.node(*e).is_ok_and(|n| {
                    n.has_label(ENTITY)
                        && n.text(ENTITY_TYPE) == Some(entity_type)
                        && owner.is_none_or(|o| n.text(UID) == Some(o))
                })
            })
            .filter(|e| model::is_correlated(g, rel.target, *e))
            .collect();
        candidates.into_iter().any(|entity| {
            let history = histories.entry(entity).or_insert_with(|| {
                let mut keys: Vec<_> = model::correlated_events(g, entity)
                    .into_iter()
                    .filter_map(|e| g.node(e).ok().and_then(model::order_key))
                    .collect();
                keys.sort_unstable();
                keys
            });
            let lo = history.partition_point(|k| *k <= k1);
            let hi = history.partition_point(|k| *k < k2);
            lo >= hi
        })
    }

    fn logs(&mut self) {
        let g = self.graph;
        for rel in g.relationships_of_type(L_E) {
            self.endpoints(Family::V4, rel, LOG, EVENT);
        }
        for event in g.nodes_with_label(EVENT) {
            let logs: Vec<ElementRef> = g
                .in_rels(event.id, Some(L_E))
                .filter(|r| self.is(r.source, LOG))
                .map(|r| ElementRef::Rel(r.id))
                .collect();
            if logs.len() != 1 {
                let mut refs = vec![ElementRef::Node(event.id)];
                refs.extend(logs.iter().copied());
                self.report(
                    Family::V4,
                    2,
                    refs,
                    format!("event belongs to {} logs, expected exactly one", logs.len()),
                );
            }
        }
        for log in g.nodes_with_label(LOG) {
            if !g
                .out_rels(log.id, Some(L_E))
                .any(|r| self.is(r.target, EVENT))
            {
                self.report(
                    Family::V4,
                    3,
                    vec![log.id.into()],
                    "log has no events".into(),
                );
            }
        }
    }

    fn classes(&mut self) {
        let g = self.graph;
        for rel in g.relationships_of_type(E_C) {
            self.endpoints(Family::V5, rel, EVENT, CLASS);
        }
        if g.count_label(CLASS) == 0 {
            return;
        }
        for event in g.nodes_with_label(EVENT) {
            let mut by_type: BTreeMap<String, Vec<NodeRef>> = BTreeMap::new();
            for r in g.out_rels(event.id, Some(E_C)) {
                if let Ok(class) = g.node(r.target) {
                    if class.has_label(CLASS) {
                        let t = class.text(TYPE).unwrap_or_default().to_owned();
                        by_type.entry(t).or_default().push(class.id);
                    }
                }
            }
            if by_type.is_empty() {
                self.report(
                    Family::V5,
                    2,
                    vec![event.id.into()],
                    "event has no class".into(),
                );
            }
            for (t, mut classes) in by_type {
                classes.sort();
                classes.dedup();
                if classes.len() > 1 {
                    let mut refs = vec![ElementRef::Node(event.id)];
                    refs.extend(classes.into_iter().map(ElementRef::Node));
                    self.report(
                        Family::V5,
                        2,
                        refs,
                        format!("event has several classes of type {t:?}"),
                    );
                }
            }
        }
    }

    fn aggregated(&mut self) {
        let g = self.graph;
        for rel in g.relationships_of_type(DF_C) {
            if !self.endpoints(Family::V6, rel, CLASS, CLASS) {
                continue;
            }
            let refs = vec![
                ElementRef::Rel(rel.id),
                rel.source.into(),
                rel.target.into(),
            ];
            let entity_type = rel.text(ENTITY_TYPE);
            let count_ok = rel
                .prop(COUNT)
                .and_then(PropertyValue::as_int)
                .is_some_and(|c| c >= 1);
            if entity_type.is_none() || !count_ok {
                self.report(
                    Family::V6,
                    1,
                    refs.clone(),
                    "DF_C needs a text EntityType and an integer count of at least 1".into(),
                );
            }
            let t1 = g.node(rel.source).ok().and_then(|n| n.text(TYPE));
            let t2 = g.node(rel.target).ok().and_then(|n| n.text(TYPE));
            if t1 != t2 {
                self.report(
                    Family::V6,
                    2,
                    refs.clone(),
                    format!("DF_C joins classes of types {t1:?} and {t2:?}"),
                );
            }
            let Some(entity_type) = entity_type else {
                continue;
            };
            let witnessed = g.in_rels(rel.source, Some(E_C)).any(|c1| {
                g.out_rels(c1.source, Some(DF)).any(|df| {
                    df.text(ENTITY_TYPE) == Some(entity_type)
                        && g.out_rels(df.target, Some(E_C))
                            .any(|c2| c2.target == rel.target)
                })
            });
            if !witnessed {
                self.report(
                    Family::V6,
                    3,
                    refs,
                    format!("no {entity_type} DF edge between events of these classes"),
                );
            }
        }
    }
}
