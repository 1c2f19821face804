//! In-memory labeled property graph.
//!
//! Nodes carry a non-empty label set, relationships exactly one type, and both
//! carry key/value properties. Node and relationship identifiers are handed
//! out in creation order and never reused, so the order of [`NodeRef`]s is the
//! order in which nodes were inserted.
//!
//! Exact-match hash indexes can be declared per `(label, key)`; a unique index
//! rejects a second node carrying the same value. [`LabeledPropertyGraph::new`]
//! installs the unique `(Entity, uID)` index used by event graphs; use
//! [`LabeledPropertyGraph::bare`] for a graph without any index.

mod index;
pub mod snapshot;
mod value;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use index::IndexSpec;
pub use value::{format_timestamp, PropertyValue, ValueKind};

use index::PropertyIndex;
use value::IndexKey;

pub type Properties = BTreeMap<String, PropertyValue>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeRef(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RelRef(pub u64);

impl fmt::Display for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

impl fmt::Display for RelRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeRef,
    pub labels: BTreeSet<String>,
    pub properties: Properties,
}

impl Node {
    pub fn has_label(&self, label: &str) -> bool {
        self.labels.contains(label)
    }

    pub fn prop(&self, key: &str) -> Option<&PropertyValue> {
        self.properties.get(key)
    }

    pub fn text(&self, key: &str) -> Option<&str> {
        self.properties.get(key).and_then(PropertyValue::as_text)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Relationship {
    pub id: RelRef,
    pub source: NodeRef,
    pub target: NodeRef,
    pub rel_type: String,
    pub properties: Properties,
}

impl Relationship {
    pub fn prop(&self, key: &str) -> Option<&PropertyValue> {
        self.properties.get(key)
    }

    pub fn text(&self, key: &str) -> Option<&str> {
        self.properties.get(key).and_then(PropertyValue::as_text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Out,
    In,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Comparator {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Comparator {
    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Eq => "=",
            Comparator::Ne => "<>",
            Comparator::Lt => "<",
            Comparator::Le => "<=",
            Comparator::Gt => ">",
            Comparator::Ge => ">=",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Self> {
        Some(match s {
            "=" => Comparator::Eq,
            "<>" | "!=" => Comparator::Ne,
            "<" => Comparator::Lt,
            "<=" => Comparator::Le,
            ">" => Comparator::Gt,
            ">=" => Comparator::Ge,
            _ => return None,
        })
    }

    pub fn holds(self, ord: std::cmp::Ordering) -> bool {
        use std::cmp::Ordering::*;
        match self {
            Comparator::Eq => ord == Equal,
            Comparator::Ne => ord != Equal,
            Comparator::Lt => ord == Less,
            Comparator::Le => ord != Greater,
            Comparator::Gt => ord == Greater,
            Comparator::Ge => ord != Less,
        }
    }

    /// Compares `left op right`; see [`PropertyValue::try_cmp`].
    pub fn eval(self, left: &PropertyValue, right: &PropertyValue) -> Result<bool, GraphError> {
        Ok(self.holds(left.try_cmp(right)?))
    }
}

/// One conjunct of a [`LabeledPropertyGraph::find_nodes`] predicate. A node
/// without the key never matches.
#[derive(Debug, Clone, PartialEq)]
pub struct Predicate {
    pub key: String,
    pub op: Comparator,
    pub value: PropertyValue,
}

impl Predicate {
    pub fn new(key: impl Into<String>, op: Comparator, value: impl Into<PropertyValue>) -> Self {
        Self {
            key: key.into(),
            op,
            value: value.into(),
        }
    }

    pub fn eq(key: impl Into<String>, value: impl Into<PropertyValue>) -> Self {
        Self::new(key, Comparator::Eq, value)
    }

    pub fn matches(&self, props: &Properties) -> Result<bool, GraphError> {
        match props.get(&self.key) {
            Some(v) => self.op.eval(v, &self.value),
            None => Ok(false),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("a node needs at least one label")]
    EmptyLabels,
    #[error("uniqueness violation on :{label}({key}) for value(s) {values:?}")]
    UniquenessViolation {
        label: String,
        key: String,
        values: Vec<String>,
    },
    #[error("relationship endpoint {0} does not exist")]
    DanglingEndpoint(NodeRef),
    #[error("unknown node {0}")]
    UnknownNode(NodeRef),
    #[error("unknown relationship {0}")]
    UnknownRelationship(RelRef),
    #[error("cannot compare {left} with {right}")]
    TypeMismatch { left: ValueKind, right: ValueKind },
}

/// Node and relationship payload; everything else is derived from it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub(crate) struct GraphData {
    pub(crate) nodes: Vec<Node>,
    pub(crate) rels: Vec<Option<Relationship>>,
    pub(crate) attributes: BTreeMap<String, PropertyValue>,
    pub(crate) index_specs: Vec<IndexSpec>,
}

#[derive(Debug, Clone, Default)]
pub struct LabeledPropertyGraph {
    data: GraphData,
    out_adj: Vec<Vec<RelRef>>,
    in_adj: Vec<Vec<RelRef>>,
    by_label: HashMap<String, Vec<NodeRef>>,
    by_type: HashMap<String, BTreeSet<RelRef>>,
    indexes: HashMap<(String, String), PropertyIndex>,
    // value kinds present per (label, key); nodes are never deleted
    kinds: HashMap<(String, String), BTreeSet<ValueKind>>,
    live_rels: usize,
}

pub const ENTITY_LABEL: &str = "Entity";
pub const UID_KEY: &str = "uID";

impl LabeledPropertyGraph {
    /// An empty graph with the unique `(Entity, uID)` index in place.
    pub fn new() -> Self {
        let mut g = Self::bare();
        g.ensure_index(ENTITY_LABEL, UID_KEY, true)
            .expect("empty graph satisfies any uniqueness index");
        g
    }

    /// An empty graph without any index.
    pub fn bare() -> Self {
        Self::default()
    }

    pub(crate) fn from_data(data: GraphData) -> Result<Self, GraphError> {
        let specs = data.index_specs.clone();
        let mut g = Self {
            data: GraphData {
                index_specs: Vec::new(),
                ..data
            },
            ..Self::default()
        };
        let n = g.data.nodes.len();
        g.out_adj = vec![Vec::new(); n];
        g.in_adj = vec![Vec::new(); n];
        for (i, node) in g.data.nodes.iter().enumerate() {
            if node.id.0 as usize != i || node.labels.is_empty() {
                return Err(GraphError::UnknownNode(node.id));
            }
            for label in &node.labels {
                g.by_label.entry(label.clone()).or_default().push(node.id);
                for (key, value) in &node.properties {
                    g.kinds
                        .entry((label.clone(), key.clone()))
                        .or_default()
                        .insert(value.kind());
                }
            }
        }
        for (i, rel) in g.data.rels.iter().enumerate() {
            let Some(rel) = rel else { continue };
            if rel.id.0 as usize != i {
                return Err(GraphError::UnknownRelationship(rel.id));
            }
            for end in [rel.source, rel.target] {
                if end.0 as usize >= n {
                    return Err(GraphError::DanglingEndpoint(end));
                }
            }
            g.out_adj[rel.source.0 as usize].push(rel.id);
            g.in_adj[rel.target.0 as usize].push(rel.id);
            g.by_type
                .entry(rel.rel_type.clone())
                .or_default()
                .insert(rel.id);
            g.live_rels += 1;
        }
        for spec in specs {
            g.ensure_index(&spec.label, &spec.key, spec.unique)?;
        }
        Ok(g)
    }

    pub(crate) fn data(&self) -> &GraphData {
        &self.data
    }

    pub fn add_node<L, S>(
        &mut self,
        labels: L,
        properties: Properties,
    ) -> Result<NodeRef, GraphError>
    where
        L: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: BTreeSet<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(GraphError::EmptyLabels);
        }
        let id = NodeRef(self.data.nodes.len() as u64);
        for label in &labels {
            for ((ilabel, key), index) in &self.indexes {
                if ilabel != label || !index.unique {
                    continue;
                }
                if let Some(v) = properties.get(key) {
                    if index.contains(v) {
                        return Err(GraphError::UniquenessViolation {
                            label: label.clone(),
                            key: key.clone(),
                            values: vec![v.to_plain_string()],
                        });
                    }
                }
            }
        }
        for label in &labels {
            self.by_label.entry(label.clone()).or_default().push(id);
            for (key, value) in &properties {
                let slot = (label.clone(), key.clone());
                if let Some(index) = self.indexes.get_mut(&slot) {
                    index.insert(value, id);
                }
                self.kinds.entry(slot).or_default().insert(value.kind());
            }
        }
        self.data.nodes.push(Node {
            id,
            labels,
            properties,
        });
        self.out_adj.push(Vec::new());
        self.in_adj.push(Vec::new());
        Ok(id)
    }

    pub fn add_relationship(
        &mut self,
        source: NodeRef,
        target: NodeRef,
        rel_type: impl Into<String>,
        properties: Properties,
    ) -> Result<RelRef, GraphError> {
        for end in [source, target] {
            if !self.contains_node(end) {
                return Err(GraphError::DanglingEndpoint(end));
            }
        }
        let id = RelRef(self.data.rels.len() as u64);
        let rel_type = rel_type.into();
        self.by_type.entry(rel_type.clone()).or_default().insert(id);
        self.out_adj[source.0 as usize].push(id);
        self.in_adj[target.0 as usize].push(id);
        self.data.rels.push(Some(Relationship {
            id,
            source,
            target,
            rel_type,
            properties,
        }));
        self.live_rels += 1;
        Ok(id)
    }

    /// Deletes a relationship. Its identifier is not reused.
    pub fn remove_relationship(&mut self, rel: RelRef) -> Result<Relationship, GraphError> {
        let slot = self
            .data
            .rels
            .get_mut(rel.0 as usize)
            .ok_or(GraphError::UnknownRelationship(rel))?;
        let removed = slot.take().ok_or(GraphError::UnknownRelationship(rel))?;
        self.out_adj[removed.source.0 as usize].retain(|r| *r != rel);
        self.in_adj[removed.target.0 as usize].retain(|r| *r != rel);
        if let Some(set) = self.by_type.get_mut(&removed.rel_type) {
            set.remove(&rel);
        }
        self.live_rels -= 1;
        Ok(removed)
    }

    pub fn contains_node(&self, node: NodeRef) -> bool {
        (node.0 as usize) < self.data.nodes.len()
    }

    pub fn node(&self, node: NodeRef) -> Result<&Node, GraphError> {
        self.data
            .nodes
            .get(node.0 as usize)
            .ok_or(GraphError::UnknownNode(node))
    }

    pub fn relationship(&self, rel: RelRef) -> Result<&Relationship, GraphError> {
        self.data
            .rels
            .get(rel.0 as usize)
            .and_then(Option::as_ref)
            .ok_or(GraphError::UnknownRelationship(rel))
    }

    pub fn node_count(&self) -> usize {
        self.data.nodes.len()
    }

    pub fn relationship_count(&self) -> usize {
        self.live_rels
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Node> + '_ {
        self.data.nodes.iter()
    }

    pub fn relationships(&self) -> impl Iterator<Item = &Relationship> + '_ {
        self.data.rels.iter().flatten()
    }

    /// Nodes carrying `label`, in creation order.
    pub fn nodes_with_label<'a>(&'a self, label: &str) -> impl Iterator<Item = &'a Node> + 'a {
        self.by_label
            .get(label)
            .map(|v| v.as_slice())
            .unwrap_or(&[])
            .iter()
            .map(move |r| &self.data.nodes[r.0 as usize])
    }

    pub fn count_label(&self, label: &str) -> usize {
        self.by_label.get(label).map_or(0, Vec::len)
    }

    /// Relationships of `rel_type`, in creation order.
    pub fn relationships_of_type<'a>(
        &'a self,
        rel_type: &str,
    ) -> impl Iterator<Item = &'a Relationship> + 'a {
        self.by_type
            .get(rel_type)
            .into_iter()
            .flatten()
            .filter_map(move |r| self.data.rels[r.0 as usize].as_ref())
    }

    pub fn count_type(&self, rel_type: &str) -> usize {
        self.by_type.get(rel_type).map_or(0, BTreeSet::len)
    }

    /// Incident relationships ordered by [`RelRef`]. With [`Direction::Both`] a
    /// self-loop is reported twice, once per endpoint.
    pub fn neighbors(
        &self,
        node: NodeRef,
        direction: Direction,
        rel_type: Option<&str>,
    ) -> Result<Vec<(RelRef, NodeRef)>, GraphError> {
        if !self.contains_node(node) {
            return Err(GraphError::UnknownNode(node));
        }
        let i = node.0 as usize;
        let mut out = Vec::new();
        let wanted = |r: &RelRef| -> Option<&Relationship> {
            let rel = self.data.rels[r.0 as usize].as_ref()?;
            match rel_type {
                Some(t) if rel.rel_type != t => None,
                _ => Some(rel),
            }
        };
        if matches!(direction, Direction::Out | Direction::Both) {
            out.extend(
                self.out_adj[i]
                    .iter()
                    .filter_map(wanted)
                    .map(|r| (r.id, r.target)),
            );
        }
        if matches!(direction, Direction::In | Direction::Both) {
            out.extend(
                self.in_adj[i]
                    .iter()
                    .filter_map(wanted)
                    .map(|r| (r.id, r.source)),
            );
        }
        out.sort_by_key(|(r, _)| *r);
        Ok(out)
    }

    /// Outgoing relationships of `node`, optionally restricted to one type.
    /// Unknown nodes yield nothing.
    pub fn out_rels<'a>(
        &'a self,
        node: NodeRef,
        rel_type: Option<&'a str>,
    ) -> impl Iterator<Item = &'a Relationship> + 'a {
        self.adjacent(&self.out_adj, node, rel_type)
    }

    pub fn in_rels<'a>(
        &'a self,
        node: NodeRef,
        rel_type: Option<&'a str>,
    ) -> impl Iterator<Item = &'a Relationship> + 'a {
        self.adjacent(&self.in_adj, node, rel_type)
    }

    fn adjacent<'a>(
        &'a self,
        adj: &'a [Vec<RelRef>],
        node: NodeRef,
        rel_type: Option<&'a str>,
    ) -> impl Iterator<Item = &'a Relationship> + 'a {
        adj.get(node.0 as usize)
            .map(|v| v.as_slice())
            .unwrap_or(&[])
            .iter()
            .filter_map(move |r| self.data.rels[r.0 as usize].as_ref())
            .filter(move |r| rel_type.is_none_or(|t| r.rel_type == t))
    }

    /// Declares an exact-match index on `(label, key)`. Declaring an index that
    /// already exists is a no-op, except that upgrading to `unique` re-checks
    /// the data.
    pub fn ensure_index(&mut self, label: &str, key: &str, unique: bool) -> Result<(), GraphError> {
        let slot = (label.to_owned(), key.to_owned());
        if let Some(existing) = self.indexes.get(&slot) {
            if existing.unique || !unique {
                return Ok(());
            }
        }
        let mut index = PropertyIndex::new(unique);
        for node in self.nodes_with_label(label) {
            if let Some(v) = node.prop(key) {
                index.insert(v, node.id);
            }
        }
        if unique {
            let dups = index.duplicate_values();
            if !dups.is_empty() {
                return Err(GraphError::UniquenessViolation {
                    label: label.to_owned(),
                    key: key.to_owned(),
                    values: dups,
                });
            }
        }
        self.indexes.insert(slot, index);
        self.data
            .index_specs
            .retain(|s| !(s.label == label && s.key == key));
        self.data.index_specs.push(IndexSpec {
            label: label.to_owned(),
            key: key.to_owned(),
            unique,
        });
        self.data.index_specs.sort();
        Ok(())
    }

    pub fn index_specs(&self) -> &[IndexSpec] {
        &self.data.index_specs
    }

    pub fn has_index(&self, label: &str, key: &str) -> bool {
        self.indexes
            .contains_key(&(label.to_owned(), key.to_owned()))
    }

    /// Nodes with `label` satisfying every conjunct. An equality conjunct on an
    /// indexed key is answered from the index; the result is the same as a
    /// full scan.
    ///
    /// A conjunct whose value kind differs from a kind stored under its key on
    /// any node with `label` is a [`GraphError::TypeMismatch`], whether or not
    /// that node would otherwise have matched.
    pub fn find_nodes(
        &self,
        label: &str,
        predicates: &[Predicate],
    ) -> Result<BTreeSet<NodeRef>, GraphError> {
        let seek = predicates
            .iter()
            .position(|p| p.op == Comparator::Eq && self.has_index(label, &p.key));
        let Some(pos) = seek else {
            return self.find_nodes_scan(label, predicates);
        };
        let p = &predicates[pos];
        for q in predicates {
            self.check_kinds(label, q)?;
        }
        let index = &self.indexes[&(label.to_owned(), p.key.clone())];
        let mut out = BTreeSet::new();
        for id in index.get(&IndexKey::from(&p.value)) {
            let node = &self.data.nodes[id.0 as usize];
            if self.all_match(node, predicates)? {
                out.insert(*id);
            }
        }
        Ok(out)
    }

    /// Same contract as [`find_nodes`](Self::find_nodes) but never uses an index.
    pub fn find_nodes_scan(
        &self,
        label: &str,
        predicates: &[Predicate],
    ) -> Result<BTreeSet<NodeRef>, GraphError> {
        for q in predicates {
            self.check_kinds(label, q)?;
        }
        let mut out = BTreeSet::new();
        for node in self.nodes_with_label(label) {
            if self.all_match(node, predicates)? {
                out.insert(node.id);
            }
        }
        Ok(out)
    }

    fn all_match(&self, node: &Node, predicates: &[Predicate]) -> Result<bool, GraphError> {
        for p in predicates {
            if !p.matches(&node.properties)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn check_kinds(&self, label: &str, p: &Predicate) -> Result<(), GraphError> {
        let want = p.value.kind();
        let present = self.kinds.get(&(label.to_owned(), p.key.clone()));
        match present.into_iter().flatten().find(|k| **k != want) {
            Some(k) => Err(GraphError::TypeMismatch {
                left: *k,
                right: want,
            }),
            None => Ok(()),
        }
    }

    /// Looks up the node carrying `label` whose `key` equals `value`, when
    /// exactly one exists.
    pub fn find_one(&self, label: &str, key: &str, value: &PropertyValue) -> Option<NodeRef> {
        let found = self
            .find_nodes(label, &[Predicate::new(key, Comparator::Eq, value.clone())])
            .ok()?;
        let mut it = found.into_iter();
        match (it.next(), it.next()) {
            (Some(n), None) => Some(n),
            _ => None,
        }
    }

    /// Graph-level attributes (for example the imported column header).
    pub fn attribute(&self, key: &str) -> Option<&PropertyValue> {
        self.data.attributes.get(key)
    }

    pub fn set_attribute(&mut self, key: impl Into<String>, value: PropertyValue) {
        self.data.attributes.insert(key.into(), value);
    }

    /// Node counts per label and relationship counts per type.
    pub fn census(&self) -> Census {
        let mut census = Census::default();
        for node in self.nodes() {
            for label in &node.labels {
                *census.nodes_by_label.entry(label.clone()).or_default() += 1;
            }
        }
        for rel in self.relationships() {
            *census.rels_by_type.entry(rel.rel_type.clone()).or_default() += 1;
        }
        census.nodes = self.node_count();
        census.relationships = self.relationship_count();
        census
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Census {
    pub nodes: usize,
    pub relationships: usize,
    pub nodes_by_label: BTreeMap<String, usize>,
    pub rels_by_type: BTreeMap<String, usize>,
}

/// Builds a property map from `(key, value)` pairs.
pub fn props<I, K, V>(pairs: I) -> Properties
where
    I: IntoIterator<Item = (K, V)>,
    K: Into<String>,
    V: Into<PropertyValue>,
{
    pairs
        .into_iter()
        .map(|(k, v)| (k.into(), v.into()))
        .collect()
}
